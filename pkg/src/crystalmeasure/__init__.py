"""A discrete measure with discrete Fourier transform whose variation is not tempered."""

from .construction import BuildConfig, CrystallineMeasure, assemble
from .measure import Atom, Interval, MeasureExpr, PeriodicLatticeMeasure, atoms_in, variation
from .meyer import MeyerCoefficients, WindowSpec, build_meyer, verify_meyer
from .schwartz import Gaussian, PsiFunction, gaussian

__all__ = [
    "Atom",
    "BuildConfig",
    "CrystallineMeasure",
    "Gaussian",
    "Interval",
    "MeasureExpr",
    "MeyerCoefficients",
    "PeriodicLatticeMeasure",
    "PsiFunction",
    "WindowSpec",
    "assemble",
    "atoms_in",
    "build_meyer",
    "gaussian",
    "variation",
    "verify_meyer",
]
