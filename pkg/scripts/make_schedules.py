"""Regenerate the shipped optimized angle files in ``src/skqaoa/data/angles``.

Runs a warm-started chain: each depth starts from the Fourier extrapolation of
the previous optimum and is refined with Nelder-Mead.  Depths up to 6 use the
exact iteration; deeper ones use the tensor-train route.

``--extrapolate-to P`` also writes a depth-P schedule.  With ``--refine-at Q``
the deepest optimum is first re-tuned as a set of Fourier modes: the search
runs over the shallow schedule, scored by the energy of its resampling to
depth Q with cheap truncation settings.  The tuned modes are then resampled
to depth P.

    python3 scripts/make_schedules.py --p-max 9 --resume --refine-at 20 --extrapolate-to 40
"""

import argparse
import logging
import time
from pathlib import Path

from skqaoa import exact, optimize, spinboson
from skqaoa.gmatrix import read_angles, write_angles
from skqaoa.mps import TruncationPolicy

OUT = Path(__file__).resolve().parents[1] / "src" / "skqaoa" / "data" / "angles"


def evaluator(p, d, cutoff):
    if p <= 6:
        return lambda a: exact.nu_exact(a).nu
    policy = TruncationPolicy(cutoff)
    return lambda a: spinboson.nu_mps(a, d, policy)[0]


def refine_modes(source, depth, evals, d, max_bond):
    """Tune ``source`` so its resampling to ``depth`` layers maximises the energy."""
    policy = TruncationPolicy(1e-8, max_bond)

    def energy(a):
        return spinboson.nu_mps(optimize.fourier_extrapolate(a, depth), d, policy)[0]

    cfg = optimize.OptimizerConfig(max_evals=evals, seed=depth)
    t0 = time.perf_counter()
    run = optimize.optimize(source.p, cfg, energy, x0=source)
    print(f"refined at p={depth}: nu {run.trace[0][1]:.6f} -> {run.best_nu:.6f} "
          f"in {run.eval_count} evals, {time.perf_counter() - t0:.0f}s", flush=True)
    return run.best_angles, run.best_nu


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p-max", type=int, default=12)
    ap.add_argument("--evals-per-layer", type=int, default=60)
    ap.add_argument("--fock-dim", type=int, default=8)
    ap.add_argument("--svd-cutoff", type=float, default=1e-9)
    ap.add_argument("--resume", action="store_true")
    ap.add_argument("--extrapolate-to", type=int, default=None)
    ap.add_argument("--refine-at", type=int, default=None)
    ap.add_argument("--refine-evals", type=int, default=300)
    ap.add_argument("--refine-fock-dim", type=int, default=6)
    ap.add_argument("--refine-max-bond", type=int, default=16)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)
    OUT.mkdir(parents=True, exist_ok=True)
    prev = None
    for p in range(1, args.p_max + 1):
        path = OUT / f"p{p:03d}.json"
        if args.resume and path.exists():
            prev = read_angles(path)
            continue
        t0 = time.perf_counter()
        cfg = optimize.OptimizerConfig(max_evals=max(60, args.evals_per_layer * p), seed=p)
        x0 = None if prev is None else optimize.fourier_extrapolate(prev, p)
        run = optimize.optimize(p, cfg, evaluator(p, args.fock_dim, args.svd_cutoff), x0=x0)
        write_angles(path, run.best_angles, nu=run.best_nu, evals=run.eval_count)
        print(f"p={p} nu={run.best_nu:.6f} evals={run.eval_count} "
              f"{time.perf_counter() - t0:.1f}s", flush=True)
        prev = run.best_angles
    if args.extrapolate_to:
        target = args.extrapolate_to
        modes, extra = prev, {}
        if args.refine_at:
            modes, nu = refine_modes(prev, args.refine_at, args.refine_evals,
                                     args.refine_fock_dim, args.refine_max_bond)
            extra = {"modes_from": args.p_max, "refined_at": args.refine_at,
                     "nu_refined": nu}
        write_angles(OUT / f"p{target:03d}.json",
                     optimize.fourier_extrapolate(modes, target), **extra)
        print(f"p={target} extrapolated from p={args.p_max}", flush=True)


if __name__ == "__main__":
    main()
