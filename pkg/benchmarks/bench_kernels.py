"""Time the exact iteration on each available bitstring-sum backend.

    python3 benchmarks/bench_kernels.py --p 4 5 6 7 --repeat 3

Prints one row per (p, backend) with the best wall time and the speed-up of
the compiled kernel over the numpy one.  Both backends must agree to 1e-12.
"""

import argparse
import sys
import timeit

import numpy as np

from skqaoa import exact, kernels
from skqaoa.gmatrix import Angles


def bench(ps, repeat=3, workers=1, seed=0):
    rows = []
    for p in ps:
        angles = Angles.from_vector(np.random.default_rng(seed + p).uniform(-1, 1, 2 * p))
        results, times = {}, {}
        for name in sorted(kernels.BACKENDS):
            results[name] = exact.nu_exact(angles, backend=name, workers=workers).nu
            times[name] = min(timeit.repeat(
                lambda: exact.nu_exact(angles, backend=name, workers=workers),
                number=1, repeat=repeat))
        ref = results["python"]
        for name in sorted(times):
            if abs(results[name] - ref) > 1e-12:
                raise AssertionError(f"{name} disagrees with python at p={p}")
            rows.append(dict(p=p, backend=name, seconds=times[name],
                             speedup=times["python"] / times[name]))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, nargs="+", default=[4, 5, 6, 7])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)
    if "cython" not in kernels.BACKENDS:
        print("compiled backend not built; only the numpy backend is timed", file=sys.stderr)
    print(f"{'p':>3} {'backend':>8} {'seconds':>10} {'speedup':>8}")
    for r in bench(args.p, args.repeat, args.workers):
        print(f"{r['p']:>3} {r['backend']:>8} {r['seconds']:>10.4f} {r['speedup']:>8.1f}")


if __name__ == "__main__":
    main()
