"""Blow-up and variation-growth tables for a build.

Usage: python3 scripts/blowup_tables.py [--levels 1:2] [--method alternating_projection]
"""

import argparse

from crystalmeasure.cli import parse_levels
from crystalmeasure.construction import BuildConfig, assemble
from crystalmeasure.verify import blowup_series, variation_growth

ap = argparse.ArgumentParser()
ap.add_argument("--levels", default="1:2")
ap.add_argument("--method", default="alternating_projection")
args = ap.parse_args()

lo, hi = parse_levels(args.levels)
fm = assemble(BuildConfig(n_lo=lo, n_hi=hi, method=args.method))

print("n  t_n           |F(t_n)|      L_n           threshold     two-path rel")
for r in blowup_series(fm, raise_on_fail=False).rows:
    print(f"{r.n}  {r.t:<12d}  {r.abs_value:<12.6g}  {r.lower:<12.6g}  {r.threshold:<12.6g}  {r.two_path_rel:.2e}")

print("\nr               M(r)          exponent")
for g in variation_growth(fm).rows:
    e = "-" if g.exponent is None else f"{g.exponent:.4f}"
    print(f"{float(g.r):<14.6g}  {g.mass:<12.6g}  {e}")
