"""Compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--sizes 20,60,150] [--iters 200] [--h 1/64]

Times the assignment solver on random cost matrices and a fixed number of
variational-solver iterations on the single-vortex field, then checks that
both backends give the same numbers.
"""
import argparse
import math
import time
from fractions import Fraction

import numpy as np

from s1classes import _kernels_py
from s1classes.fields import canonical_field
from s1classes.geometry import Domain, centred_grid
from s1classes.matching import Configuration

try:
    from s1classes import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def timeit(fn, repeat=3):
    best = math.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def bench_hungarian(sizes, rng):
    print(f"{'assignment n':>14} {'python [s]':>12} {'compiled [s]':>13} {'speedup':>8}")
    for n in sizes:
        C = rng.random((n, n))
        tp, (cp, _, _) = timeit(lambda: _kernels_py.hungarian(C))
        if _compiled is None:
            print(f"{n:>14} {tp:>12.4f} {'-':>13} {'-':>8}")
            continue
        tc, (cc, _, _) = timeit(lambda: _compiled.hungarian(C))
        same = math.isclose(C[np.arange(n), cp].sum(), C[np.arange(n), cc].sum(), rel_tol=1e-12)
        print(f"{n:>14} {tp:>12.4f} {tc:>13.4f} {tp / tc:>7.1f}x" + ("" if same else "  MISMATCH"))


def _admm_run(mod, h, iters):
    # drive the solver loop directly with the chosen kernel module
    from s1classes.sigma import solver

    u = canonical_field(Configuration(((0.1, 0.05),), (1,)), Domain.disc(), centred_grid(Domain.disc(), h))
    saved = solver.kernels.admm_step
    solver.kernels.admm_step = mod.admm_step
    try:
        t = time.perf_counter()
        res = solver.sigma_variational(u, solver.SolverSettings(max_iters=iters, tol=0.0))
        return time.perf_counter() - t, res.value
    finally:
        solver.kernels.admm_step = saved


def bench_admm(h, iters):
    tp, vp = _admm_run(_kernels_py, h, iters)
    print(f"\nvariational solver, h={h:g}, {iters} iterations")
    print(f"  python   {tp:8.3f} s   value {vp:.10f}")
    if _compiled is not None:
        tc, vc = _admm_run(_compiled, h, iters)
        print(f"  compiled {tc:8.3f} s   value {vc:.10f}   speedup {tp / tc:.2f}x")
        if not math.isclose(vp, vc, rel_tol=1e-9):
            print("  MISMATCH between backends")


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--sizes", default="20,60,150")
    ap.add_argument("--iters", type=int, default=200)
    ap.add_argument("--h", default="1/64")
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    if _compiled is None:
        print("compiled extension not built; timing the fallback only\n")
    bench_hungarian([int(s) for s in args.sizes.split(",")], rng)
    bench_admm(float(Fraction(args.h)), args.iters)


if __name__ == "__main__":
    main()
