"""Truncated single-mode Fock space: displacements and truncation bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

__all__ = [
    "annihilation",
    "displacement",
    "coherent_state",
    "TruncationBudget",
    "truncation_budget",
    "required_dim",
    "exp_taylor_bound",
]


def annihilation(d: int) -> np.ndarray:
    if d < 2:
        raise ValueError(f"Fock dimension must be >= 2, got {d}")
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1).astype(complex)


def displacement(d: int, alpha: complex) -> np.ndarray:
    """``exp(alpha c^dag - conj(alpha) c)`` of the generator truncated to ``d`` levels.

    Index ``n`` is boson number ``n``.  No renormalisation is applied, so the
    truncation leaks norm near the top levels.
    """
    c = annihilation(d)
    alpha = complex(alpha)
    if alpha == 0:
        return np.eye(d, dtype=complex)
    return expm(alpha * c.conj().T - np.conj(alpha) * c)


def coherent_state(d: int, alpha: complex) -> np.ndarray:
    """Exact coherent-state amplitudes ``exp(-|a|^2/2) a^n / sqrt(n!)`` for ``n < d``."""
    n = np.arange(d)
    logfact = np.array([math.lgamma(k + 1) for k in n])
    alpha = complex(alpha)
    if alpha == 0:
        out = np.zeros(d, complex)
        out[0] = 1
        return out
    mag = np.exp(n * np.log(abs(alpha)) - 0.5 * logfact - 0.5 * abs(alpha) ** 2)
    return mag * np.exp(1j * n * np.angle(alpha))


@dataclass(frozen=True)
class TruncationBudget:
    """Per-mode thresholds ``d_star[l] = (sum_t |L[l,t]| |gamma_t|)^2``."""

    p: int
    p_prime: int
    gamma_max: float
    d_star: np.ndarray

    @property
    def threshold(self) -> float:
        """Smallest truncation at which the bound applies: ``e * max(d_star)``."""
        return math.e * float(np.max(self.d_star, initial=0.0))

    def bound(self, d: float) -> float:
        """Multi-mode 2-norm error bound ``2 sqrt(p') exp(-(d - e max d_star))``."""
        excess = d - self.threshold
        if excess < 0:
            return math.inf
        return 2.0 * math.sqrt(self.p_prime) * math.exp(-excess)

    def single_mode_bound(self, l: int, d: float) -> float:
        excess = d - math.e * float(self.d_star[l])
        if excess < 0:
            return math.inf
        return 2.0 * math.exp(-excess)


def truncation_budget(L, gamma) -> TruncationBudget:
    L = np.atleast_2d(np.asarray(L, dtype=complex))
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    if L.shape[1] != gamma.size:
        raise ValueError(f"L has {L.shape[1]} columns but {gamma.size} gammas")
    d_star = (np.abs(L) @ np.abs(gamma)) ** 2
    gmax = float(np.max(np.abs(gamma), initial=0.0))
    return TruncationBudget(gamma.size, L.shape[0], gmax, d_star)


def required_dim(budget: TruncationBudget, target_error: float) -> int:
    """Smallest integer ``d`` with ``budget.bound(d) <= target_error``."""
    if not 0 < target_error < 1:
        raise ValueError("target_error must lie in (0, 1)")
    excess = math.log(2.0 * math.sqrt(budget.p_prime) / target_error)
    d = max(math.ceil(budget.threshold + excess - 1e-12), math.ceil(budget.threshold))
    # guard the closed form against rounding at the boundary
    while budget.bound(d) > target_error:
        d += 1
    while d > 0 and budget.bound(d - 1) <= target_error:
        d -= 1
    return d


def exp_taylor_bound(x: float, n: int, y: float) -> bool:
    """Check ``x^n / n! <= exp(-y)`` under the hypotheses ``n >= e x + y``, ``x, y >= 0``."""
    if x < 0 or y < 0:
        raise ValueError("x and y must be non-negative")
    if n < math.e * x + y:
        raise ValueError(f"n={n} below e*x + y = {math.e * x + y:.6g}")
    if x == 0:
        lhs = 0.0 if n > 0 else 1.0
        return lhs <= math.exp(-y)
    log_lhs = n * math.log(x) - math.lgamma(n + 1)
    return log_lhs <= -y
