"""Derivative-free maximisation of the infinite-size energy over (gamma, beta).

Two methods are offered:

* ``nelder-mead``: scipy's adaptive simplex inside the box ``[-2, 2]^{2p}``,
  restarted from the incumbent with a shrinking simplex while budget remains.
* ``composite-model``: a trust-region loop that fits a separate quadratic
  surrogate to the real and imaginary part of every overlap component and
  combines them through the exact energy formula.  Requires an evaluator that
  returns the overlap vector rather than the energy.

Candidates can be handed out in batches through ``batch_evaluator`` so that a
caller may evaluate them concurrently; results are consumed in order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .gmatrix import Angles

__all__ = [
    "OptimizerConfig",
    "OptimizationRun",
    "BudgetExhausted",
    "EvaluatorError",
    "fourier_extrapolate",
    "random_angles",
    "optimize",
    "composite_energy",
]

log = logging.getLogger(__name__)

BOX = 2.0
METHODS = ("nelder-mead", "composite-model")
INITS = ("file", "fourier-extrapolate", "random")


class BudgetExhausted(RuntimeError):
    pass


class EvaluatorError(RuntimeError):
    """Raised when the energy evaluator fails; carries the offending angles."""

    def __init__(self, angles: Angles, cause: BaseException):
        super().__init__(f"evaluator failed at gamma={list(angles.gamma)}, "
                         f"beta={list(angles.beta)}: {cause!r}")
        self.angles = angles


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for :func:`optimize`.

    ``max_evals=None`` means ``20 p``.  ``initial_step`` is the simplex edge
    (nelder-mead) or starting trust radius (composite-model).
    """

    max_evals: int | None = None
    method: str = "nelder-mead"
    seed: int = 0
    init: str = "random"
    initial_step: float = 0.1
    xatol: float = 1e-6
    fatol: float = 1e-9

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")

    def budget(self, p: int) -> int:
        n = 20 * p if self.max_evals is None else int(self.max_evals)
        if n < 2 * p + 1:
            raise ValueError(f"max_evals={n} below 2p+1={2 * p + 1}")
        return n


@dataclass
class OptimizationRun:
    best_angles: Angles
    best_nu: float
    eval_count: int
    trace: list = field(default_factory=list, repr=False)

    @property
    def best_so_far(self) -> np.ndarray:
        """Running maximum of the traced energies."""
        return np.maximum.accumulate([nu for _, nu in self.trace])


def _dst_basis(p: int, i) -> np.ndarray:
    # sin((k - 1/2)(i - 1/2) pi / p), k = 1..p, evaluated at layer coordinate i
    k = np.arange(1, p + 1)
    return np.sin(np.outer(np.asarray(i, float) - 0.5, k - 0.5) * math.pi / p)


def _dct_basis(p: int, i) -> np.ndarray:
    k = np.arange(1, p + 1)
    return np.cos(np.outer(np.asarray(i, float) - 0.5, k - 0.5) * math.pi / p)


def fourier_extrapolate(source: Angles, target_p: int) -> Angles:
    """Re-sample a schedule onto ``target_p`` layers.

    gamma is expanded in the sine basis and beta in the cosine basis of length
    ``source.p``; the series is then evaluated at ``target_p`` evenly spaced
    layer positions covering the same normalised range.
    """
    p = source.p
    if target_p < p:
        raise ValueError(f"target_p={target_p} < source p={p}")
    if target_p == p:
        return source
    layers = np.arange(1, p + 1)
    u = np.linalg.solve(_dst_basis(p, layers), source.gamma)
    v = np.linalg.solve(_dct_basis(p, layers), source.beta)
    # layer r of the target sits at the same fraction (r - 1/2)/target_p
    pos = (np.arange(1, target_p + 1) - 0.5) * p / target_p + 0.5
    return Angles(_dst_basis(p, pos) @ u, _dct_basis(p, pos) @ v)


def random_angles(p: int, rng: np.random.Generator) -> Angles:
    """Uniform draw from ``[0.05, 0.8]^{2p}``, the quadrant holding the usual optimum."""
    return Angles.from_vector(rng.uniform(0.05, 0.8, 2 * p))


class _Counter:
    """Budget-enforcing wrapper that records every evaluation in order."""

    def __init__(self, fn, budget, batch_fn=None):
        self.fn = fn
        self.batch_fn = batch_fn
        self.budget = budget
        self.trace: list = []
        self.extra: list = []

    @property
    def count(self):
        return len(self.trace)

    def _record(self, angles, out):
        if isinstance(out, tuple):
            nu, aux = out
        else:
            nu, aux = out, None
        try:
            nu = float(nu)
        except (TypeError, ValueError) as exc:
            raise EvaluatorError(angles, exc) from exc
        if not math.isfinite(nu):
            raise EvaluatorError(angles, FloatingPointError("non-finite energy"))
        self.trace.append((angles, nu))
        self.extra.append(aux)
        return nu

    def __call__(self, angles: Angles):
        if self.count >= self.budget:
            raise BudgetExhausted
        try:
            out = self.fn(angles)
        except (BudgetExhausted, KeyboardInterrupt):
            raise
        except Exception as exc:
            raise EvaluatorError(angles, exc) from exc
        return self._record(angles, out)

    def many(self, points: Sequence[Angles]):
        room = self.budget - self.count
        points = list(points)[:room]
        if not points:
            raise BudgetExhausted
        if self.batch_fn is None:
            return [self(a) for a in points]
        try:
            outs = list(self.batch_fn(points))
        except Exception as exc:
            raise EvaluatorError(points[0], exc) from exc
        return [self._record(a, o) for a, o in zip(points, outs)]

    def best(self):
        i = int(np.argmax([nu for _, nu in self.trace]))
        return self.trace[i]


def _clip(x):
    return np.clip(x, -BOX, BOX)


def _nelder_mead(counter: _Counter, x0: np.ndarray, cfg: OptimizerConfig):
    n = x0.size
    step = cfg.initial_step
    x = _clip(x0)
    stale = 0
    while counter.count < counter.budget and step > cfg.xatol:
        start_best = counter.best()[1] if counter.trace else -math.inf
        simplex = [x] + [_clip(x + step * e) for e in np.eye(n)]
        # the first vertex is not in the box interior when clipped; nudge inward
        for i in range(1, n + 1):
            if np.allclose(simplex[i], x):
                simplex[i] = _clip(x - step * np.eye(n)[i - 1])
        try:
            minimize(lambda y: -counter(Angles.from_vector(y)), x, method="Nelder-Mead",
                     bounds=[(-BOX, BOX)] * n,
                     options=dict(adaptive=True, initial_simplex=np.array(simplex),
                                  xatol=cfg.xatol, fatol=cfg.fatol,
                                  maxfev=counter.budget - counter.count))
        except BudgetExhausted:
            break
        best_angles, best_nu = counter.best()
        x = best_angles.to_vector()
        # restart on stagnation with a smaller simplex around the incumbent
        stale = stale + 1 if best_nu <= start_best + cfg.fatol else 0
        if stale >= 2:
            break
        step *= 0.5


def composite_energy(gamma, overlaps) -> float:
    """``Im sum_r gamma_r conj(g_r)^2 = -2 sum_r gamma_r Re g_r Im g_r``."""
    g = np.asarray(overlaps, complex)
    return float(-2.0 * np.sum(np.asarray(gamma) * g.real * g.imag))


def _quad_features(dx: np.ndarray) -> np.ndarray:
    # constant, linear and diagonal quadratic terms
    dx = np.atleast_2d(dx)
    return np.hstack([np.ones((dx.shape[0], 1)), dx, 0.5 * dx**2])


def _composite_model(counter: _Counter, x0: np.ndarray, cfg: OptimizerConfig, p: int):
    """Trust-region ascent on a surrogate built from per-component quadratics."""
    n = x0.size
    radius = cfg.initial_step
    x = _clip(x0)

    def sample(points):
        return counter.many([Angles.from_vector(_clip(q)) for q in points])

    try:
        sample([x] + [x + radius * e for e in np.eye(n)] + [x - radius * e for e in np.eye(n)])
    except BudgetExhausted:
        return
    while counter.count < counter.budget and radius > cfg.xatol:
        xs = np.array([a.to_vector() for a, _ in counter.trace])
        comps = [c for c in counter.extra]
        if any(c is None for c in comps):
            raise ValueError("composite-model needs an evaluator returning (nu, overlaps)")
        comps = np.array(comps)
        fx = counter.best()[1]
        x = counter.best()[0].to_vector()
        # fit on the nearest points to the incumbent
        dist = np.linalg.norm(xs - x, axis=1)
        m = min(len(xs), 4 * n + 1)
        near = np.argsort(dist)[:m]
        A = _quad_features(xs[near] - x)
        coef_re, *_ = np.linalg.lstsq(A, comps[near].real, rcond=None)
        coef_im, *_ = np.linalg.lstsq(A, comps[near].imag, rcond=None)

        def model(dx):
            f = _quad_features(dx)
            g = (f @ coef_re + 1j * (f @ coef_im)).reshape(-1)
            return composite_energy((x + dx)[:p], g)

        res = minimize(lambda dx: -model(dx), np.zeros(n), method="L-BFGS-B",
                       bounds=[(max(-radius, -BOX - xi), min(radius, BOX - xi)) for xi in x])
        dx = res.x
        predicted = model(dx) - model(np.zeros(n))
        if np.linalg.norm(dx) < cfg.xatol or predicted <= 0:
            radius *= 0.5
            # refresh the local design so the next fit sees nearby points
            try:
                sample([x + radius * e for e in np.eye(n)])
            except BudgetExhausted:
                return
            continue
        try:
            (new,) = sample([x + dx])
        except BudgetExhausted:
            return
        rho = (new - fx) / predicted
        if rho > 0.75 and np.linalg.norm(dx) > 0.9 * radius:
            radius = min(2 * radius, 1.0)
        elif rho < 0.25:
            radius *= 0.5


def optimize(p: int, cfg: OptimizerConfig, evaluator: Callable,
             x0: Angles | None = None,
             batch_evaluator: Callable | None = None) -> OptimizationRun:
    """Maximise ``evaluator(angles)`` over the box ``[-2, 2]^{2p}``.

    Args:
        p: depth.
        cfg: method, budget and seed.
        evaluator: ``Angles -> float``; for ``composite-model`` it must return
            ``(nu, overlaps)`` with ``overlaps[r] = <Psi_r | Psi_0>``.
        x0: starting point; drawn with :func:`random_angles` when omitted.
        batch_evaluator: optional ``list[Angles] -> list`` used for design
            batches so the caller can evaluate them concurrently.

    Returns:
        The best point found and the ordered evaluation trace.
    """
    budget = cfg.budget(p)
    rng = np.random.default_rng(cfg.seed)
    if x0 is None:
        x0 = random_angles(p, rng)
    if x0.p != p:
        raise ValueError(f"starting point has p={x0.p}, expected {p}")
    counter = _Counter(evaluator, budget, batch_evaluator)
    try:
        counter(x0)
    except BudgetExhausted:  # pragma: no cover - budget >= 2p+1
        pass
    if cfg.method == "nelder-mead":
        _nelder_mead(counter, x0.to_vector(), cfg)
    else:
        _composite_model(counter, x0.to_vector(), cfg, p)
    best_angles, best_nu = counter.best()
    log.info("optimize p=%d: nu=%.10f after %d evaluations", p, best_nu, counter.count)
    return OptimizationRun(best_angles, best_nu, counter.count, counter.trace)
