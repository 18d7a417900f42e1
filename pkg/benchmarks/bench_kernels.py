"""Compare the numba kernels with their numpy fallbacks.

Usage: ``python3 benchmarks/bench_kernels.py [--quick]``.  Each kernel is
run once to trigger compilation, then timed as the best of ``repeat`` runs.
"""
import argparse
import time

import numpy as np

from haartraces import _kernels


def best_of(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(quick):
    rng = np.random.default_rng(0)
    sizes = (250, 500) if quick else (500, 1000, 2000)
    for n in sizes:
        x, y = rng.standard_normal((n, 2)), rng.standard_normal((n, 2))
        cost = _kernels.euclidean_cost_numpy(x, y)
        yield f"assignment N={n}", "assignment", (cost,)
        yield f"euclidean_cost N={n}", "euclidean_cost", (x, y)
    count = 200 if quick else 2000
    g = rng.standard_normal((count, 20, 10)) + 1j * rng.standard_normal((count, 20, 10))
    yield f"symplectic_gram_schmidt {count}x USp(20)", "symplectic_gram_schmidt", (g,)
    count = 1000 if quick else 10000
    m = (rng.standard_normal((count, 12, 12)) + 1j * rng.standard_normal((count, 12, 12))) / 5
    yield f"power_traces {count}x 12x12, d=6", "power_traces", (m, 6)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _kernels.HAS_NUMBA:
        raise SystemExit("numba is not installed")
    print(f"{'kernel':<42}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for label, name, fargs in cases(args.quick):
        tn = best_of(getattr(_kernels, f"{name}_numba"), fargs, args.repeat)
        tp = best_of(getattr(_kernels, f"{name}_numpy"), fargs, args.repeat)
        print(f"{label:<42}{tn:>12.4f}{tp:>12.4f}{tp / tn:>10.1f}")


if __name__ == "__main__":
    main()
