"""Power-law fits of the normalised energy deficit with bootstrap intervals.

The deficit is ``eps(p) = 1 - nu_p / P`` with ``P`` the Parisi value.  Two
models are supported::

    three-param:  eps = m / p**eta + b
    four-param:   eps = m / (p**eta + c) + b
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.optimize import least_squares

__all__ = [
    "PARISI",
    "MODELS",
    "EnergySeries",
    "FitReport",
    "FitError",
    "load_series",
    "published_series",
    "eps_series",
    "model_eps",
    "fit",
    "bootstrap_ci",
]

PARISI = 0.763166
MODELS = {"three-param": ("m", "eta", "b"), "four-param": ("m", "eta", "c", "b")}
ETA_STARTS = (0.5, 0.75, 1.0, 1.25)


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnergySeries:
    p: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=int).reshape(-1)
        nu = np.asarray(self.nu, dtype=float).reshape(-1)
        if p.size != nu.size:
            raise ValueError("p and nu have different lengths")
        if np.any(np.diff(p) <= 0):
            raise ValueError("p must be strictly increasing")
        if np.any((nu <= 0) | (nu >= PARISI)):
            warnings.warn("some energies lie outside (0, P*)", stacklevel=2)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "nu", nu)

    def window(self, p_min=None, p_max=None) -> "EnergySeries":
        keep = np.ones(self.p.size, bool)
        if p_min is not None:
            keep &= self.p >= p_min
        if p_max is not None:
            keep &= self.p <= p_max
        return EnergySeries(self.p[keep], self.nu[keep])

    def __len__(self):
        return int(self.p.size)


def load_series(path) -> EnergySeries:
    """Read a CSV with ``p`` and ``nu`` columns."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "p" not in rows[0] or "nu" not in rows[0]:
        raise ValueError(f"{path}: expected columns p, nu")
    return EnergySeries([int(r["p"]) for r in rows], [float(r["nu"]) for r in rows])


def published_series() -> EnergySeries:
    """Best known infinite-size energies shipped with the package (p = 1..160)."""
    ref = resources.files("skqaoa") / "data" / "published_energies.csv"
    with resources.as_file(ref) as path:
        return load_series(path)


def eps_series(series: EnergySeries, parisi: float = PARISI):
    """Return ``(p, 1 - nu / parisi)``."""
    if parisi <= 0:
        raise ValueError("parisi must be positive")
    return series.p.astype(float), 1.0 - series.nu / parisi


def model_eps(model: str, params, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if model == "three-param":
        m, eta, b = params
        return m / p**eta + b
    if model == "four-param":
        m, eta, c, b = params
        return m / (p**eta + c) + b
    raise ValueError(f"unknown model {model!r}")


@dataclass
class FitReport:
    model: str
    params: dict
    r2_complement: float
    sse: float
    n_points: int
    ci: dict = field(default_factory=dict)
    level: float = 0.997

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "params": self.params,
            "ci": {k: list(v) for k, v in self.ci.items()},
            "level": self.level,
            "r2_complement": self.r2_complement,
            "sse": self.sse,
            "n_points": self.n_points,
        }


def _solve(model, p, eps):
    names = MODELS[model]

    def resid(theta):
        return model_eps(model, theta, p) - eps

    best = None
    for eta in ETA_STARTS:
        # with eta (and c) fixed the model is linear in m and b
        c0 = 1.0 if model == "four-param" else 0.0
        X = np.column_stack([1.0 / (p**eta + c0), np.ones_like(p)])
        (m0, b0), *_ = np.linalg.lstsq(X, eps, rcond=None)
        theta0 = [m0, eta, b0] if model == "three-param" else [m0, eta, c0, b0]
        try:
            res = least_squares(resid, theta0, method="lm", xtol=1e-15, ftol=1e-15,
                                gtol=1e-15, max_nfev=20000)
        except (ValueError, FloatingPointError):
            continue
        if not res.success or not np.all(np.isfinite(res.x)):
            continue
        sse = float(np.sum(res.fun**2))
        if best is None or sse < best[1]:
            best = (res.x, sse)
    if best is None:
        raise FitError(f"{model} fit did not converge from any start")
    theta, sse = best
    params = dict(zip(names, map(float, theta)))
    if params["eta"] <= 0:
        raise FitError(f"fitted eta={params['eta']:.4g} is not positive")
    return params, sse


def fit(series: EnergySeries, model: str = "three-param", p_min=None, p_max=None,
        parisi: float = PARISI) -> FitReport:
    """Unweighted Levenberg-Marquardt fit of ``eps`` on the window ``[p_min, p_max]``.

    Starts from each eta in ``ETA_STARTS`` and keeps the smallest residual.
    """
    if model not in MODELS:
        raise ValueError(f"model must be one of {list(MODELS)}")
    sub = series.window(p_min, p_max)
    need = 4 if model == "three-param" else 5
    if len(sub) < need:
        raise ValueError(f"{model} needs at least {need} points, window has {len(sub)}")
    p, eps = eps_series(sub, parisi)
    params, sse = _solve(model, p, eps)
    sst = float(np.sum((eps - eps.mean()) ** 2))
    if sst == 0:
        raise ValueError("degenerate window: all deficits equal")
    return FitReport(model, params, sse / sst, sse, len(sub))


def bootstrap_ci(series: EnergySeries, model: str = "three-param", resamples: int = 1000,
                 seed: int = 0, p_min=None, p_max=None, parisi: float = PARISI,
                 level: float = 0.997) -> FitReport:
    """Point fit plus central ``level`` percentile intervals from row resampling.

    Resamples with fewer distinct depths than the model has parameters, or
    that fail to fit, count as failures; more than 10% failures is an error.
    """
    if resamples < 200:
        raise ValueError("resamples must be >= 200")
    report = fit(series, model, p_min, p_max, parisi)
    sub = series.window(p_min, p_max)
    p_all, eps_all = eps_series(sub, parisi)
    rng = np.random.default_rng(seed)
    names = MODELS[model]
    draws, failures = [], 0
    for _ in range(resamples):
        idx = rng.integers(0, len(sub), len(sub))
        if np.unique(idx).size <= len(names):
            failures += 1
            continue
        try:
            params, _ = _solve(model, p_all[idx], eps_all[idx])
        except FitError:
            failures += 1
            continue
        draws.append([params[k] for k in names])
    if failures > 0.1 * resamples:
        raise FitError(f"{failures}/{resamples} bootstrap fits failed")
    draws = np.array(draws)
    lo, hi = np.quantile(draws, [(1 - level) / 2, (1 + level) / 2], axis=0)
    report.ci = {k: (float(a), float(b)) for k, a, b in zip(names, lo, hi)}
    report.level = level
    return report
