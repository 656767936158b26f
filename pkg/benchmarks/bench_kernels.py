"""Time the compiled kernels against the pure-Python reference.

    python benchmarks/bench_kernels.py [--repeat 3] [--quick]

Both backends get identical inputs; the script checks their outputs agree
before reporting timings.
"""

import argparse
import time

import numpy as np

from replicaload import _pykernels
from replicaload import allocation as al
from replicaload import demand as dm

try:
    from replicaload import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(quick):
    rng = np.random.default_rng(0)
    rows = 500 if quick else 5000
    cyc = al.build("cyclic", 50, 3)
    rho = dm.sample_matrix(dm.Exp(2.0), rows, 50, rng)
    yield ("feasible_batch cyclic n=50 d=3", f"{rows} vectors",
           lambda mod: mod.feasible_batch(cyc.n_nodes, cyc.indptr, cyc.indices, rho, 1.0), np.array_equal)

    reg = al.sample_choice_arrays("random", 50, 3, rows, rng)
    yield ("feasible_batch_regular random n=50 d=3", f"{rows} vectors",
           lambda mod: mod.feasible_batch_regular(50, reg, rho, 1.0), np.array_equal)

    small = al.build("random", 16, 3, 1)
    r16 = dm.sample(dm.Exp(1.5), 16, rng)
    yield ("first_violating_subset k=16", "1 vector",
           lambda mod: mod.first_violating_subset(16, small.indptr, small.indices, r16, 1.0), lambda a, b: a == b)

    n, d = (200, 5) if quick else (1000, 10)
    g = np.random.default_rng(3)
    queue = g.permutation(np.repeat(np.arange(n, dtype=np.int64), d))
    draws = g.random(8 * n * d + 64)
    yield (f"approx_block n={n} d={d}", "1 build",
           lambda mod: mod.approx_block(n, d, queue, draws, 200 * n * d + 1000),
           lambda a, b: a[1] == b[1] and (a[0] is None) == (b[0] is None)
           and (a[0] is None or np.array_equal(np.asarray(a[0]), np.asarray(b[0]))))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the Python backend is available")
    print(f"{'kernel':42s} {'input':>12s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s}")
    for name, size, fn, same in cases(args.quick):
        t_py, out_py = best_of(lambda: fn(_pykernels), args.repeat)
        if _kernels is None:
            print(f"{name:42s} {size:>12s} {t_py:10.4f} {'-':>10s} {'-':>8s}")
            continue
        t_cy, out_cy = best_of(lambda: fn(_kernels), args.repeat)
        if not same(out_py, out_cy):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:42s} {size:>12s} {t_py:10.4f} {t_cy:10.4f} {t_py / t_cy:8.1f}x")


if __name__ == "__main__":
    main()
