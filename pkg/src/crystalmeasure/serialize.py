"""Deterministic on-disk formats.

Rationals are written as "p/q" strings, never floats.  CSV floats use 17
significant digits; JSON floats use Python's shortest round-trip repr.  All
writes go through a temp file and an atomic rename.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from .construction import BuildConfig, Level, LevelParams, LevelPlacement, from_levels
from .measure import Atom
from .meyer import MeyerCoefficients

ATOM_COLUMNS = ["position_num", "position_den", "weight_re", "weight_im"]


def fmt_float(x: float) -> str:
    return format(float(x), ".16e")


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_jsonable(obj):
    """Fractions to strings, complex to [re, im], numpy scalars to Python."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=1, sort_keys=True) + "\n"


def write_json(path, obj):
    atomic_write(path, dumps(obj))


# -- atoms -------------------------------------------------------------------

def atoms_to_csv(atoms) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ATOM_COLUMNS)
    for a in atoms:
        w.writerow([a.position.numerator, a.position.denominator, fmt_float(a.weight.real), fmt_float(a.weight.imag)])
    return buf.getvalue()


def atoms_from_csv(text: str) -> list[Atom]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ATOM_COLUMNS:
        raise ValueError(f"atom CSV must start with header {','.join(ATOM_COLUMNS)}")
    return [Atom(Fraction(int(n), int(d)), complex(float(re), float(im))) for n, d, re, im in rows[1:]]


def atoms_to_json(atoms) -> str:
    return dumps(
        [{"num": str(a.position.numerator), "den": str(a.position.denominator), "re": a.weight.real, "im": a.weight.imag} for a in atoms]
    )


def atoms_from_json(text: str) -> list[Atom]:
    return [Atom(Fraction(int(r["num"]), int(r["den"])), complex(r["re"], r["im"])) for r in json.loads(text)]


# -- gap-measure coefficients ------------------------------------------------

def meyer_to_dict(mc: MeyerCoefficients) -> dict:
    return {
        "M": mc.M,
        "alpha": str(mc.alpha),
        "j_star": mc.j_star,
        "c_re": [fmt_float(x) for x in mc.c.real],
        "c_im": [fmt_float(x) for x in mc.c.imag],
        "certificate": mc.certificate,
    }


def meyer_from_dict(d: dict) -> MeyerCoefficients:
    c = np.array([float(x) for x in d["c_re"]]) + 1j * np.array([float(x) for x in d["c_im"]])
    return MeyerCoefficients(int(d["M"]), Fraction(d["alpha"]), c, int(d["j_star"]), dict(d.get("certificate", {})))


def save_meyer(path, mc: MeyerCoefficients):
    write_json(path, meyer_to_dict(mc))


def load_meyer(path) -> MeyerCoefficients:
    return meyer_from_dict(json.loads(Path(path).read_text()))


def meyer_filename(M: int) -> str:
    return f"meyer_M{M}.json"


# -- assembled measure -------------------------------------------------------

def config_to_dict(cfg: BuildConfig) -> dict:
    return {
        "base": cfg.base,
        "alpha": str(cfg.alpha),
        "n_lo": cfg.n_lo,
        "n_hi": cfg.n_hi,
        "q": cfg.q,
        "seed": cfg.seed,
        "tol": cfg.tol,
        "method": cfg.method,
        "precision": cfg.precision,
    }


def config_from_dict(d: dict) -> BuildConfig:
    return BuildConfig(
        base=int(d["base"]),
        alpha=Fraction(d["alpha"]),
        n_lo=int(d["n_lo"]),
        n_hi=int(d["n_hi"]),
        q=int(d["q"]),
        seed=int(d["seed"]),
        tol=float(d["tol"]),
        method=d["method"],
        precision=d.get("precision", "double"),
    )


def measure_to_dict(fm) -> dict:
    return {
        "config": config_to_dict(fm.config),
        "levels": [
            {
                "n": lv.n,
                "M": lv.params.M,
                "tau": str(lv.params.tau),
                "j_star": lv.placement.j_star,
                "j_dd": lv.placement.j_dd,
                "h": str(lv.placement.h),
                "lambda": str(lv.placement.lam),
                "meyer_file": meyer_filename(lv.params.M),
            }
            for lv in fm.levels
        ],
        "certificates": fm.certificates,
    }


def save_measure(directory, fm, name: str = "measure.json") -> Path:
    directory = Path(directory)
    for lv in fm.levels:
        save_meyer(directory / meyer_filename(lv.params.M), lv.meyer)
    path = directory / name
    write_json(path, measure_to_dict(fm))
    return path


def load_measure(path, certify: bool = True):
    """Rebuild a measure from its JSON record and the referenced coefficient files.

    Certificates are recomputed from the loaded data, not trusted from disk.
    """
    path = Path(path)
    d = json.loads(path.read_text())
    cfg = config_from_dict(d["config"])
    levels = []
    for r in d["levels"]:
        mc = load_meyer(path.parent / r["meyer_file"])
        params = LevelParams(int(r["n"]), int(r["M"]), Fraction(r["tau"]))
        placement = LevelPlacement(int(r["n"]), int(r["j_star"]), int(r["j_dd"]), Fraction(r["h"]), Fraction(r["lambda"]))
        if mc.M != params.M or mc.j_star != placement.j_star:
            raise ValueError(f"level {params.n}: coefficient file does not match the level record")
        levels.append(Level(params, mc, placement))
    return from_levels(cfg, levels, certify=certify)
