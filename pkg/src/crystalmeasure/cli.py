"""Command line: meyer, build, verify, export.

Exit code is 0 iff every requested certificate passes; 1 on a certificate
failure; 2 on invalid input (infeasible window or schedule, bad arguments).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import measure as ms
from . import serialize as ser
from . import verify as vf
from .construction import BuildConfig, assemble
from .errors import CertificateFailure, InfeasibleWindow, NoSolution, ScheduleInfeasible
from .measure import parse_interval
from .meyer import WindowSpec, build_meyer, verify_meyer

log = logging.getLogger("crystalmeasure")

CONFIG_KEYS = {"M", "alpha", "base", "levels", "q", "tol", "seed", "out", "format", "method", "window", "measure", "side"}


def read_config(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {k!r}")
        out[k] = v
    return out


def parse_levels(text: str) -> tuple[int, int]:
    """'1:2', '1,2', '3' or 'none' (empty range)."""
    text = text.strip()
    if text in ("", "none"):
        return 1, 0
    if ":" in text:
        a, b = text.split(":")
        return int(a), int(b)
    vals = sorted(int(v) for v in text.split(","))
    if vals != list(range(vals[0], vals[-1] + 1)):
        raise ValueError("levels must be a contiguous range")
    return vals[0], vals[-1]


def _merge(args, defaults: dict):
    """Command-line flags override config-file values, which override defaults."""
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    for k, v in defaults.items():
        if getattr(args, k, None) is None:
            setattr(args, k, cfg.get(k, v))
    return args


def build_config_from(args) -> BuildConfig:
    n_lo, n_hi = parse_levels(str(args.levels))
    return BuildConfig(
        base=int(args.base),
        alpha=Fraction(str(args.alpha)),
        n_lo=n_lo,
        n_hi=n_hi,
        q=int(args.q),
        seed=int(args.seed),
        tol=float(args.tol),
        method=str(args.method),
    )


# -- subcommands -------------------------------------------------------------

def cmd_meyer(args) -> int:
    _merge(args, {"M": 32, "alpha": "1/8", "method": "auto", "seed": 0, "tol": 1e-9, "out": "out"})
    w = WindowSpec(Fraction(str(args.alpha)), int(args.M))
    mc = build_meyer(w, str(args.method), int(args.seed), float(args.tol))
    report = verify_meyer(mc, w, float(args.tol))
    out = Path(args.out)
    ser.save_meyer(out / ser.meyer_filename(w.M), mc)
    ser.write_json(out / f"meyer_M{w.M}_certificate.json", dict(report, solver=mc.certificate))
    print(f"meyer M={w.M} alpha={w.alpha}: freq residual {report['freq_residual']:.3g}, j*={mc.j_star} -> {out}")
    return 0


def cmd_build(args) -> int:
    _merge(args, {"base": 32, "alpha": "1/8", "levels": "1:2", "q": 8, "seed": 0, "tol": 1e-9,
                  "method": "alternating_projection", "out": "out"})
    cfg = build_config_from(args)
    fm = assemble(cfg)
    out = Path(args.out)
    ser.save_measure(out, fm)
    ser.write_json(out / "certificates.json", dict(fm.certificates, passed=fm.passed))
    atoms = [a for lv in fm.levels for a in ms.atoms_in(fm.mu, lv.placement.window)]
    ser.atomic_write(out / "atoms_windows.csv", ser.atoms_to_csv(atoms))
    status = "pass" if fm.passed else "FAIL"
    print(f"build levels={[lv.n for lv in fm.levels]} certificates: {status} -> {out}")
    return 0 if fm.passed else 1


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _f(x) -> str:
    return ser.fmt_float(x)


def cmd_verify(args) -> int:
    _merge(args, {"out": None, "measure": None})
    if args.measure is None:
        raise ValueError("verify needs --measure")
    mpath = Path(args.measure)
    out = Path(args.out) if args.out else mpath.parent
    fm = ser.load_measure(mpath)
    atoms_file = mpath.parent / "atoms_windows.csv"
    if atoms_file.exists():
        stored = ser.atoms_from_csv(atoms_file.read_text())
        fresh = [a for lv in fm.levels for a in ms.atoms_in(fm.mu, lv.placement.window)]
        if ser.atoms_to_csv(stored) != ser.atoms_to_csv(fresh):
            raise CertificateFailure(f"{atoms_file} does not match the atoms of the rebuilt measure")
    report = vf.headline_report(fm)
    ser.write_json(out / "verdict.json", report)
    blow = [r for r in report["blowup"] if "n" in r]
    ser.atomic_write(
        out / "blowup.csv",
        _csv([[r["n"], r["t"], _f(r["abs_F"]), _f(r["lower"]), _f(r["threshold"])] for r in blow],
             ["n", "t_n", "abs_F", "L_n", "threshold"]),
    )
    ser.atomic_write(
        out / "growth.csv",
        _csv([[g["r"], _f(g["M"]), "" if g["exponent"] is None else _f(g["exponent"])] for g in report["growth"]],
             ["r", "M_r", "exponent"]),
    )
    ser.atomic_write(
        out / "poisson.csv",
        _csv([[_f(p.get("diff", float("nan"))), _f(p.get("allowed", float("nan"))), p["passed"]] for p in report["poisson"]],
             ["residual", "allowed", "passed"]),
    )
    for lv in fm.levels:
        t_n = int(1 / (2 * lv.params.tau))
        step = max(t_n // 64, 1)
        ts = [t_n + k * step for k in range(-64, 65)]
        vals = [abs(vf.hat_convolution_at(fm, fm.psi(), t)) for t in ts]
        ser.atomic_write(out / f"plot_F_level{lv.n}.csv", _csv([[t, _f(v)] for t, v in zip(ts, vals)], ["t", "abs_F"]))
    print(report["verdict"])
    ok = report["crystalline"] and not report["quasicrystal"]
    return 0 if ok else 1


def cmd_export(args) -> int:
    _merge(args, {"measure": None, "window": None, "format": "csv", "out": None, "side": "mu"})
    if args.measure is None or args.window is None:
        raise ValueError("export needs --measure and --window")
    fm = ser.load_measure(args.measure, certify=False)
    W = parse_interval(args.window)
    m = fm.mu if args.side == "mu" else fm.mu_hat
    atoms = ms.atoms_in(m, W)
    text = ser.atoms_to_csv(atoms) if args.format == "csv" else ser.atoms_to_json(atoms)
    if args.out:
        ser.atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    log.info("exported %d atoms", len(atoms))
    return 0


# -- parser ------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crystalmeasure", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key = value file")
        sp.add_argument("--out")

    sp = sub.add_parser("meyer", help="build and certify one gap measure")
    common(sp)
    sp.add_argument("--M", type=int)
    sp.add_argument("--alpha")
    sp.add_argument("--method", choices=["auto", "nullspace", "alternating_projection"])
    sp.add_argument("--seed", type=int)
    sp.add_argument("--tol", type=float)
    sp.set_defaults(func=cmd_meyer)

    sp = sub.add_parser("build", help="assemble the measure and its certificates")
    common(sp)
    sp.add_argument("--base", type=int)
    sp.add_argument("--alpha")
    sp.add_argument("--levels", help="e.g. 1:2, 1,2 or none")
    sp.add_argument("--q", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--method", choices=["auto", "nullspace", "alternating_projection"])
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("verify", help="blow-up, temperedness, growth and Poisson reports")
    common(sp)
    sp.add_argument("--measure")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("export", help="atoms of mu or mu^ in a window")
    common(sp)
    sp.add_argument("--measure")
    sp.add_argument("--window", help='e.g. "[-1, 1]" or "(a, b)"')
    sp.add_argument("--format", choices=["csv", "json"])
    sp.add_argument("--side", choices=["mu", "mu_hat"])
    sp.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InfeasibleWindow, ScheduleInfeasible) as exc:
        extra = f" (smallest valid n: {exc.smallest_valid_n})" if getattr(exc, "smallest_valid_n", None) else ""
        print(f"error: {exc}{extra}", file=sys.stderr)
        return 2
    except CertificateFailure as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return 1
    except NoSolution as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
