import pytest

from crystalmeasure.construction import BuildConfig, assemble
from crystalmeasure.meyer import WindowSpec, build_meyer


@pytest.fixture(scope="session")
def default_build():
    return assemble(BuildConfig())


@pytest.fixture(scope="session")
def single_level_build():
    return assemble(BuildConfig(n_lo=1, n_hi=1))


@pytest.fixture(scope="session")
def sigma32():
    return build_meyer(WindowSpec("1/8", 32))


@pytest.fixture(scope="session")
def sigma32_nullspace():
    return build_meyer(WindowSpec("1/8", 32), method="nullspace")


@pytest.fixture(scope="session")
def sigma4():
    return build_meyer(WindowSpec("1/8", 4), method="nullspace")
