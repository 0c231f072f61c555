"""Command-line front end: ``skqaoa <subcommand> [flags]``.

Exit status is 0 on success, 1 on usage errors (bad flags, unreadable or
malformed files) and 2 on numerical failures (zero-norm state, loss of
positive semidefiniteness, non-converged fits, non-finite values).

Every run appends one provenance row to the results CSV (``--results``,
default ``skqaoa_results.csv`` in the working directory).

File schemas:

* angle file: JSON object ``{"p": int, "gamma": [p reals], "beta": [p reals]}``;
  extra keys are ignored.
* energy data for ``fit``: CSV with header ``p,nu``.
* L matrix for ``truncation-bound``: CSV of complex numbers in Python
  notation (``1+0j``), one row per mode.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import sys
import time
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import click
import numpy as np
import scipy

from . import __version__, exact, finite, fit, fock, kernels, optimize, spinboson
from .gmatrix import Angles, read_angles, write_angles
from .mps import TruncationPolicy, write_bond_profile

log = logging.getLogger("skqaoa")

RESULT_COLUMNS = [
    "timestamp", "command", "config_hash", "version", "numpy", "scipy", "backend",
    "workers", "status", "walltime_ms", "p", "nu", "d", "delta", "chi_max_observed",
    "discarded_weight", "detail",
]

NUMERICAL_ERRORS = (
    spinboson.ZeroNormError,
    spinboson.PsdLossError,
    fit.FitError,
    FloatingPointError,
    np.linalg.LinAlgError,
    optimize.EvaluatorError,
)


class UsageFailure(click.UsageError):
    pass


def _angles(path) -> Angles:
    try:
        return read_angles(path)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise UsageFailure(f"cannot read angle file {path}: {exc}") from None


def _config_hash(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _append_result(path, row: dict) -> None:
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, extrasaction="ignore")
        if new:
            w.writeheader()
        w.writerow(row)


class _Run:
    """Collects result fields for the provenance row of one invocation."""

    def __init__(self, ctx: click.Context, command: str, params: dict):
        self.ctx = ctx
        self.row = {
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "command": command,
            "config_hash": _config_hash({"command": command, **params}),
            "version": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "backend": kernels.BACKEND,
            "workers": ctx.obj["workers"],
            "status": "ok",
        }
        self.t0 = time.perf_counter()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.row["walltime_ms"] = round(1000 * (time.perf_counter() - self.t0), 3)
        if exc_type is not None:
            self.row["status"] = f"error: {exc_type.__name__}"
            self.row.setdefault("detail", str(exc)[:200])
        try:
            _append_result(self.ctx.obj["results"], self.row)
        except OSError as err:
            log.warning("could not append to results file: %s", err)
        return False


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True,
              help="Worker threads for the bitstring sum, layer updates and instances.")
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"],
                                               case_sensitive=False),
              default="WARNING", show_default=True)
@click.option("--results", type=click.Path(dir_okay=False), default="skqaoa_results.csv",
              show_default=True, help="CSV that receives one provenance row per run.")
@click.version_option(__version__, prog_name="skqaoa")
@click.pass_context
def cli(ctx, workers, log_level, results):
    """Infinite-size and finite-size QAOA energies for the SK model.

    \b
    File schemas:
      angle file   JSON {"p": int, "gamma": [p reals], "beta": [p reals]}
      fit data     CSV with header p,nu
      L matrix     CSV of complex numbers (1+0j), one row per mode
      results      CSV, one provenance row appended per run

    Exit status: 0 success, 1 usage error, 2 numerical failure.
    """
    logging.basicConfig(level=getattr(logging, log_level.upper()),
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    ctx.obj.update(workers=workers, results=results)


@cli.command("exact")
@click.option("--angles", "angles_path", required=True, type=click.Path(dir_okay=False),
              help="Angle file (JSON: p, gamma, beta).")
@click.option("--p-cap", type=click.IntRange(min=1), default=exact.P_CAP, show_default=True,
              help="Refuse depths above this (cost grows as 4^p).")
@click.option("--dump-g", type=click.Path(dir_okay=False), default=None,
              help="Write every iterate as CSV with columns m, j, k, re, im.")
@click.pass_context
def exact_cmd(ctx, angles_path, p_cap, dump_g):
    """Energy from the exact G-matrix iteration."""
    angles = _angles(angles_path)
    with _Run(ctx, "exact", dict(angles=angles.to_vector().tolist(), p_cap=p_cap)) as run:
        try:
            trace = exact.nu_exact(angles, p_cap=p_cap, workers=ctx.obj["workers"])
        except exact.ExactCapError as exc:
            raise UsageFailure(str(exc)) from None
        if dump_g:
            exact.dump_iterates(trace, dump_g)
        run.row.update(p=angles.p, nu=repr(trace.nu))
        click.echo(f"{trace.nu:.15g}")


def _policy(svd_cutoff, max_bond, absolute=False):
    try:
        return TruncationPolicy(svd_cutoff, max_bond, absolute)
    except ValueError as exc:
        raise UsageFailure(str(exc)) from None


def _max_bond(value):
    if value is None or str(value).lower() == "none":
        return None
    try:
        v = int(value)
    except ValueError:
        raise UsageFailure(f"--max-bond must be an integer or 'none', got {value!r}") from None
    if v < 1:
        raise UsageFailure("--max-bond must be positive")
    return v


@cli.command("energy")
@click.option("--angles", "angles_path", required=True, type=click.Path(dir_okay=False))
@click.option("--fock-dim", type=click.IntRange(min=2), default=8, show_default=True)
@click.option("--svd-cutoff", type=float, default=1e-8, show_default=True,
              help="Relative singular-value cutoff in [0, 1).")
@click.option("--absolute-cutoff", is_flag=True,
              help="Treat --svd-cutoff as an absolute singular-value threshold.")
@click.option("--max-bond", default="none", show_default=True,
              help="Hard bond-dimension cap, or 'none'.")
@click.option("--diagnostics", type=click.Path(dir_okay=False), default=None,
              help="Write the per-layer bond-dimension profile as CSV.")
@click.pass_context
def energy_cmd(ctx, angles_path, fock_dim, svd_cutoff, absolute_cutoff, max_bond,
               diagnostics):
    """Energy from the spin-boson tensor-train simulation."""
    angles = _angles(angles_path)
    policy = _policy(svd_cutoff, _max_bond(max_bond), absolute_cutoff)
    params = dict(angles=angles.to_vector().tolist(), d=fock_dim, delta=svd_cutoff,
                  max_bond=policy.max_bond, absolute=absolute_cutoff)
    with _Run(ctx, "energy", params) as run:
        run.row.update(p=angles.p, d=fock_dim, delta=svd_cutoff)
        nu, diag = spinboson.nu_mps(angles, fock_dim, policy, workers=ctx.obj["workers"],
                                    record_profile=diagnostics is not None)
        if diagnostics:
            write_bond_profile(diagnostics, diag.bond_profile)
        run.row.update(nu=repr(nu), chi_max_observed=diag.max_bond,
                       discarded_weight=diag.discarded_weight)
        click.echo(f"{nu:.15g}")
        click.echo(f"p={angles.p} d={fock_dim} delta={svd_cutoff:g} "
                   f"max_bond={diag.max_bond} discarded_weight={diag.discarded_weight:.3e} "
                   f"norm_leakage={diag.norm_leakage:.3e} cap_active={diag.cap_active} "
                   f"walltime={diag.walltime:.3f}s")


def _parse_init(init: str, p: int, seed: int) -> tuple[str, Angles | None]:
    if init == "random":
        return "random", None
    kind, _, path = init.partition(":")
    if kind == "fourier" and path:
        return "fourier-extrapolate", optimize.fourier_extrapolate(_angles(path), p)
    if kind == "file" and path:
        a = _angles(path)
    elif not path and kind:
        a = _angles(kind)
    else:
        raise UsageFailure(f"bad --init value {init!r}")
    if a.p != p:
        raise UsageFailure(f"init file has p={a.p}, expected {p}")
    return "file", a


@cli.command("optimize")
@click.option("--p", "p", required=True, type=click.IntRange(min=1))
@click.option("--init", default="random", show_default=True,
              help="'random', an angle file ('file:<path>' or bare path), or "
                   "'fourier:<path>' to extrapolate a shallower schedule.")
@click.option("--method", type=click.Choice(optimize.METHODS), default="nelder-mead",
              show_default=True)
@click.option("--max-evals", type=click.IntRange(min=1), default=None,
              help="Evaluation budget (default 20 p).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--fock-dim", type=click.IntRange(min=2), default=8, show_default=True)
@click.option("--svd-cutoff", type=float, default=1e-8, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the best angles here.")
@click.pass_context
def optimize_cmd(ctx, p, init, method, max_evals, seed, fock_dim, svd_cutoff, out):
    """Maximise the tensor-train energy over the angles."""
    kind, x0 = _parse_init(init, p, seed)
    policy = _policy(svd_cutoff, None)
    try:
        cfg = optimize.OptimizerConfig(max_evals=max_evals, method=method, seed=seed,
                                       init=kind)
        cfg.budget(p)
    except ValueError as exc:
        raise UsageFailure(str(exc)) from None
    workers = ctx.obj["workers"]

    def evaluator(a):
        nu, diag = spinboson.nu_mps(a, fock_dim, policy, workers=workers)
        return (nu, diag.final_overlaps) if method == "composite-model" else nu

    params = dict(p=p, init=init, method=method, max_evals=max_evals, seed=seed,
                  d=fock_dim, delta=svd_cutoff)
    with _Run(ctx, "optimize", params) as run:
        res = optimize.optimize(p, cfg, evaluator, x0=x0)
        run.row.update(p=p, nu=repr(res.best_nu), d=fock_dim, delta=svd_cutoff,
                       detail=f"evals={res.eval_count}")
        if out:
            write_angles(out, res.best_angles, nu=res.best_nu, evals=res.eval_count)
        click.echo(f"{res.best_nu:.15g}")
        click.echo(json.dumps({"gamma": res.best_angles.gamma.tolist(),
                               "beta": res.best_angles.beta.tolist(),
                               "evals": res.eval_count}))


@cli.command("fit")
@click.option("--data", type=click.Path(dir_okay=False), default=None,
              help="CSV with columns p,nu (default: the bundled best-known energies).")
@click.option("--model", type=click.Choice(["3p", "4p"]), default="3p", show_default=True)
@click.option("--p-min", type=int, default=None)
@click.option("--p-max", type=int, default=None)
@click.option("--bootstrap", type=click.IntRange(min=0), default=0, show_default=True,
              help="Number of resamples for 99.7% intervals (0 disables, else >= 200).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--parisi", type=float, default=fit.PARISI, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the fit report as JSON.")
@click.option("--plot-data", type=click.Path(dir_okay=False), default=None,
              help="Write a CSV of (p, p^-eta, eps) for plotting.")
@click.pass_context
def fit_cmd(ctx, data, model, p_min, p_max, bootstrap, seed, parisi, out, plot_data):
    """Fit the energy deficit to a power law in p."""
    try:
        series = fit.published_series() if data is None else fit.load_series(data)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageFailure(f"cannot read data: {exc}") from None
    name = {"3p": "three-param", "4p": "four-param"}[model]
    if 0 < bootstrap < 200:
        raise UsageFailure("--bootstrap needs at least 200 resamples")
    params = dict(data=data, model=name, p_min=p_min, p_max=p_max, bootstrap=bootstrap,
                  seed=seed, parisi=parisi)
    with _Run(ctx, "fit", params) as run:
        try:
            if bootstrap:
                report = fit.bootstrap_ci(series, name, bootstrap, seed, p_min, p_max, parisi)
            else:
                report = fit.fit(series, name, p_min, p_max, parisi)
        except ValueError as exc:
            raise UsageFailure(str(exc)) from None
        doc = json.dumps(report.as_dict(), indent=2)
        run.row.update(detail=json.dumps(report.params))
        if out:
            Path(out).write_text(doc + "\n")
        if plot_data:
            sub = series.window(p_min, p_max)
            ps, eps = fit.eps_series(sub, parisi)
            with open(plot_data, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["p", "p_pow_minus_eta", "eps"])
                for pv, ev in zip(ps, eps):
                    w.writerow([int(pv), pv ** -report.params["eta"], ev])
        click.echo(doc)


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise UsageFailure(f"expected a comma-separated list of integers, got {text!r}") from None


def _bundled_angles_dir():
    return resources.files("skqaoa") / "data" / "angles"


def load_schedule(p: int, angles_dir=None) -> Angles:
    """Angle file ``p###.json`` from ``angles_dir`` or the bundled schedules."""
    base = Path(angles_dir) if angles_dir else _bundled_angles_dir()
    path = Path(str(base)) / f"p{p:03d}.json"
    if not path.exists():
        raise UsageFailure(f"no angle file for p={p} in {base}")
    return _angles(path)


@cli.command("finite")
@click.option("--n-list", default="6,8,10,12,14", show_default=True)
@click.option("--p-list", default="1,2,3", show_default=True)
@click.option("--angles-dir", type=click.Path(file_okay=False), default=None,
              help="Directory of p###.json angle files (default: bundled schedules).")
@click.option("--instances", type=click.IntRange(min=2), default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="CSV with n, p, instances, mean_ar, stderr_ar, mean_p_success, "
                   "stderr_p_success.")
@click.pass_context
def finite_cmd(ctx, n_list, p_list, angles_dir, instances, seed, out):
    """Approximation ratio and success probability on random finite instances."""
    ns, ps = _int_list(n_list), _int_list(p_list)
    if any(n > finite.N_CAP or n < 2 for n in ns):
        raise UsageFailure(f"n must lie in [2, {finite.N_CAP}]")
    schedules = {p: load_schedule(p, angles_dir) for p in ps}
    params = dict(ns=ns, ps=ps, angles_dir=angles_dir, instances=instances, seed=seed)
    with _Run(ctx, "finite", params) as run:
        rows = finite.run_grid(ns, schedules, instances, seed, ctx.obj["workers"])
        if out:
            finite.write_grid(out, rows)
        click.echo("n,p,mean_ar,stderr_ar,mean_p_success,stderr_p_success")
        for r in rows:
            click.echo(f"{r['n']},{r['p']},{r['mean_ar']:.6f},{r['stderr_ar']:.6f},"
                       f"{r['mean_p_success']:.6g},{r['stderr_p_success']:.3g}")
        run.row.update(detail=f"cells={len(rows)}")


def _read_l_csv(path) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            rows = [[complex(x.strip()) for x in r] for r in csv.reader(fh) if r]
        return np.array(rows, dtype=complex)
    except (OSError, ValueError) as exc:
        raise UsageFailure(f"cannot read L matrix {path}: {exc}") from None


@cli.command("truncation-bound")
@click.option("--angles", "angles_path", required=True, type=click.Path(dir_okay=False))
@click.option("--L", "l_source", default="computed", show_default=True,
              help="'computed' (from a tensor-train run at --fock-dim), 'worst-case' "
                   "(all entries of modulus one), or a CSV path.")
@click.option("--target", type=float, default=1e-6, show_default=True,
              help="Target 2-norm truncation error in (0, 1).")
@click.option("--fock-dim", type=click.IntRange(min=2), default=8, show_default=True,
              help="Fock dimension used when L is computed.")
@click.pass_context
def truncation_bound_cmd(ctx, angles_path, l_source, target, fock_dim):
    """Per-mode thresholds and the Fock dimension that meets a target error."""
    angles = _angles(angles_path)
    p = angles.p
    if not 0 < target < 1:
        raise UsageFailure("--target must lie in (0, 1)")
    params = dict(angles=angles.to_vector().tolist(), L=l_source, target=target, d=fock_dim)
    with _Run(ctx, "truncation-bound", params) as run:
        if l_source == "worst-case":
            L = np.triu(np.ones((p, p), complex))
        elif l_source == "computed":
            _, diag = spinboson.nu_mps(angles, fock_dim, TruncationPolicy(1e-10))
            L = diag.l_factor[:p, :p]
        else:
            L = _read_l_csv(l_source)
        try:
            budget = fock.truncation_budget(L, angles.gamma)
        except ValueError as exc:
            raise UsageFailure(str(exc)) from None
        d = fock.required_dim(budget, target)
        run.row.update(p=p, d=d, detail=f"threshold={budget.threshold:.6g}")
        click.echo("d_star " + " ".join(f"{x:.6g}" for x in budget.d_star))
        click.echo(f"threshold {budget.threshold:.6g}")
        click.echo(f"required_d {d}")


@cli.command("crosscheck")
@click.option("--angles", "angles_path", type=click.Path(dir_okay=False), default=None,
              help="Angle file; omit to draw random angles with --p and --seed.")
@click.option("--p", "p", type=click.IntRange(min=1), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--fock-dim", type=click.IntRange(min=2), default=12, show_default=True)
@click.option("--svd-cutoff", type=float, default=1e-12, show_default=True)
@click.option("--grid", is_flag=True, help="Also sweep d in --d-list and cutoffs in --delta-list.")
@click.option("--d-list", default="3,4,5,6,8,10", show_default=True)
@click.option("--delta-list", default="1e-4,1e-6,1e-8,1e-10", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="CSV of the grid: d, delta, nu_mps, abs_err, rel_err.")
@click.pass_context
def crosscheck_cmd(ctx, angles_path, p, seed, fock_dim, svd_cutoff, grid, d_list,
                   delta_list, out):
    """Compare the tensor-train energy against the exact iteration."""
    if angles_path:
        angles = _angles(angles_path)
    elif p is not None:
        angles = Angles.from_vector(np.random.default_rng(seed).uniform(-1, 1, 2 * p))
    else:
        raise UsageFailure("give --angles or --p")
    if angles.p > exact.P_CAP:
        raise UsageFailure(f"p={angles.p} exceeds the exact cap {exact.P_CAP}")
    try:
        deltas = [float(x) for x in delta_list.split(",") if x.strip()]
    except ValueError:
        raise UsageFailure(f"bad --delta-list {delta_list!r}") from None
    ds = _int_list(d_list)
    params = dict(angles=angles.to_vector().tolist(), d=fock_dim, delta=svd_cutoff,
                  grid=grid, ds=ds, deltas=deltas)
    with _Run(ctx, "crosscheck", params) as run:
        workers = ctx.obj["workers"]
        ref = exact.nu_exact(angles, workers=workers).nu
        nu, diag = spinboson.nu_mps(angles, fock_dim, _policy(svd_cutoff, None),
                                    workers=workers)
        err = abs(nu - ref)
        rel = err / abs(ref) if ref != 0 else (0.0 if err == 0 else math.inf)
        run.row.update(p=angles.p, nu=repr(nu), d=fock_dim, delta=svd_cutoff,
                       chi_max_observed=diag.max_bond,
                       discarded_weight=diag.discarded_weight, detail=f"abs_err={err:.3e}")
        click.echo(f"nu_exact {ref:.15g}")
        click.echo(f"nu_mps   {nu:.15g}")
        click.echo(f"abs_err  {err:.3e}")
        click.echo(f"rel_err  {rel:.3e}")
        if grid:
            rows = []
            for d in ds:
                for delta in deltas:
                    v, _ = spinboson.nu_mps(angles, d, _policy(delta, None), workers=workers)
                    e = abs(v - ref)
                    rows.append((d, delta, v, e, e / abs(ref) if ref else e))
            click.echo("d,delta,nu_mps,abs_err,rel_err")
            for r in rows:
                click.echo(f"{r[0]},{r[1]:g},{r[2]:.15g},{r[3]:.3e},{r[4]:.3e}")
            if out:
                with open(out, "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["d", "delta", "nu_mps", "abs_err", "rel_err"])
                    w.writerows(rows)


def main(argv=None) -> int:
    """Entry point; returns the process exit code instead of raising."""
    try:
        cli.main(args=argv, prog_name="skqaoa", standalone_mode=False)
    except click.exceptions.NoArgsIsHelpError as exc:  # pragma: no cover - click >= 8.2
        click.echo(exc.ctx.get_help(), err=True)
        return 1
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except NUMERICAL_ERRORS as exc:
        click.echo(f"numerical failure: {type(exc).__name__}: {exc}", err=True)
        return 2
    return 0


def _console_entry():  # pragma: no cover - exercised through the installed script
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    _console_entry()
