"""Compare the two gap-measure solvers across M: time, residual and l1 mass."""

import time

import numpy as np

from crystalmeasure.meyer import WindowSpec, build_meyer, verify_meyer

print(f"{'M':>5} {'method':>22} {'seconds':>8} {'freq residual':>14} {'sum|c|':>10}")
for M in (4, 8, 16, 32, 64):
    w = WindowSpec("1/8", M)
    for method in ("nullspace", "alternating_projection"):
        if method == "nullspace" and M > 32:
            continue
        t0 = time.perf_counter()
        mc = build_meyer(w, method=method)
        dt = time.perf_counter() - t0
        rep = verify_meyer(mc, w, 1e-8)
        print(f"{M:>5} {method:>22} {dt:>8.3f} {rep['freq_residual']:>14.3e} {np.abs(mc.c).sum():>10.2f}")
