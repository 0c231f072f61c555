"""Infinite-size SK QAOA energy from a spin coupled to p bosonic modes.

Each state is stored as its two spin projections, each a tensor train over the
bosonic modes.  Layer ``t`` displaces mode ``l`` by ``+alpha_l`` on the spin-0
branch and ``-alpha_l`` on the spin-1 branch, with
``alpha = -i gamma_t L[:, t]``, then rotates the spin by ``exp(-i beta_t X)``.
``L`` is grown one column per layer from the overlaps of the Z-inserted states.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import mps
from .fock import displacement
from .gmatrix import Angles
from .mps import TensorTrain, TruncationPolicy

__all__ = [
    "SpinBosonState",
    "LFactor",
    "ZeroNormError",
    "PsdLossError",
    "Diagnostics",
    "initial_registry",
    "spin_boson_overlap",
    "apply_z",
    "apply_layer",
    "grow_l",
    "nu_mps",
    "energy_from_overlaps",
]

CLAMP_TOL = 1e-8


class ZeroNormError(ArithmeticError):
    """A truncated state collapsed to zero norm (cutoff too aggressive)."""


class PsdLossError(ArithmeticError):
    """The accumulated overlap matrix stopped being positive semidefinite."""


@dataclass(frozen=True)
class SpinBosonState:
    psi0: TensorTrain
    psi1: TensorTrain

    @property
    def norm_sq(self) -> float:
        return (mps.overlap(self.psi0, self.psi0) + mps.overlap(self.psi1, self.psi1)).real

    @property
    def max_bond(self) -> int:
        return max(self.psi0.max_bond, self.psi1.max_bond)


def spin_boson_overlap(a: SpinBosonState, b: SpinBosonState) -> complex:
    return mps.overlap(a.psi0, b.psi0) + mps.overlap(a.psi1, b.psi1)


def apply_z(s: SpinBosonState) -> SpinBosonState:
    return SpinBosonState(s.psi0, mps.scale(s.psi1, -1.0))


def initial_registry(p: int, d: int) -> list[SpinBosonState]:
    """``[Z|+>, |+>]`` with every mode in the vacuum."""
    vac = np.zeros(d, complex)
    vac[0] = 1.0
    half = mps.scale(mps.product_state([vac] * p), 1 / math.sqrt(2))
    plus = SpinBosonState(half, half)
    return [apply_z(plus), plus]


@dataclass
class LFactor:
    """Upper-triangular ``L`` with ``L^dag L`` equal to the overlap matrix of the
    Z-inserted states; ``size`` columns are filled."""

    L: np.ndarray
    size: int

    @classmethod
    def start(cls, p: int) -> "LFactor":
        L = np.zeros((p + 1, p + 1), complex)
        L[0, 0] = 1.0
        return cls(L, 1)

    @property
    def gram(self) -> np.ndarray:
        k = self.size
        return self.L[:k, :k].conj().T @ self.L[:k, :k]


def grow_l(factor: LFactor, g_column, tol: float = 1e-12) -> LFactor:
    """Append one column from ``g_column[i] = <Psi_i | Psi_new>``.

    Solves ``L^dag x = g`` by forward substitution and sets the new diagonal to
    ``sqrt(1 - |x|^2)``; a radicand in ``[-1e-8, 0)`` is clamped to zero.
    """
    k = factor.size
    g = np.asarray(g_column, complex).reshape(-1)
    if g.size != k:
        raise ValueError(f"expected {k} overlaps, got {g.size}")
    if k >= factor.L.shape[0]:
        raise ValueError("L is already full")
    R = factor.L[:k, :k]
    if np.min(np.abs(np.diag(R))) <= tol:
        raise PsdLossError("leading block of L is singular")
    x = np.zeros(k, complex)
    for i in range(k):
        x[i] = (g[i] - R[:i, i].conj() @ x[:i]) / np.conj(R[i, i])
    rad = 1.0 - float(np.vdot(x, x).real)
    if rad < -CLAMP_TOL:
        raise PsdLossError(f"new diagonal radicand {rad:.3e} < 0 (overlap matrix not PSD)")
    L = factor.L.copy()
    L[:k, k] = x
    L[k, k] = math.sqrt(max(rad, 0.0))
    return LFactor(L, k + 1)


@dataclass
class LayerStats:
    layer: int
    max_bond: int
    discarded: float
    cap_active: bool
    seconds: float


@dataclass
class Diagnostics:
    d: int
    policy: TruncationPolicy
    gherm: np.ndarray = field(repr=False, default=None)
    final_overlaps: np.ndarray = field(repr=False, default=None)
    layers: list = field(default_factory=list)
    min_norm_sq: float = 1.0
    walltime: float = 0.0
    bond_profile: list = field(default_factory=list, repr=False)
    l_factor: np.ndarray = field(repr=False, default=None)

    @property
    def max_bond(self) -> int:
        return max((s.max_bond for s in self.layers), default=1)

    @property
    def discarded_weight(self) -> float:
        return float(sum(s.discarded for s in self.layers))

    @property
    def norm_leakage(self) -> float:
        return max(0.0, 1.0 - self.min_norm_sq)

    @property
    def cap_active(self) -> bool:
        return any(s.cap_active for s in self.layers)


def _update_state(state, ops_plus, ops_minus, c, s, policy):
    psi0 = mps.apply_product(state.psi0, ops_plus)
    psi1 = mps.apply_product(state.psi1, ops_minus)
    new0, r0 = mps.compress(mps.add(psi0, c, psi1, -1j * s), policy)
    new1, r1 = mps.compress(mps.add(psi0, -1j * s, psi1, c), policy)
    return SpinBosonState(new0, new1), r0.discarded_weight + r1.discarded_weight, \
        r0.cap_active or r1.cap_active


def apply_layer(registry, alpha, beta_t: float, policy: TruncationPolicy,
                d: int | None = None, workers: int = 1, consume: bool = False):
    """Advance every registered state by one layer.

    ``registry`` holds ``[Psi_1, .., Psi_l, Psi]`` (an empty list starts from
    ``[Z|+>, |+>]``).  Returns ``(g_column, new_registry, stats)`` where the new
    registry is ``[Psi_1, .., Psi_l, Z Psi, Psi]`` and
    ``g_column[i] = <Psi_i | Z Psi>`` for the first ``l`` entries.

    With ``consume=True`` and a single worker, each entry of ``registry`` is
    set to ``None`` once its successor exists, so old and new registries are
    never held in full at the same time.
    """
    alpha = np.asarray(alpha, complex)
    if not registry:
        if d is None:
            raise ValueError("Fock dimension needed to start an empty registry")
        registry = initial_registry(alpha.size, d)
    d = registry[0].psi0.d
    if alpha.size != registry[0].psi0.p:
        raise ValueError("alpha length differs from the number of modes")
    ops_plus = [None if a == 0 else displacement(d, a) for a in alpha]
    ops_minus = [None if a == 0 else displacement(d, -a) for a in alpha]
    c, s = math.cos(beta_t), math.sin(beta_t)

    def work(state):
        return _update_state(state, ops_plus, ops_minus, c, s, policy)

    if workers > 1 and len(registry) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, registry))
    elif consume:
        results = []
        for i in range(len(registry)):
            state, registry[i] = registry[i], None
            results.append(work(state))
            del state
    else:
        results = [work(st) for st in registry]
    new = [r[0] for r in results]
    discarded = float(sum(r[1] for r in results))
    capped = any(r[2] for r in results)

    for st in new:
        if st.norm_sq <= 1e-14:
            raise ZeroNormError("state truncated to zero norm; lower the SVD cutoff")
    newest = new[-1]
    new[-1] = apply_z(newest)
    new.append(newest)
    target = new[-2]
    g = np.array([spin_boson_overlap(new[i], target) for i in range(len(new) - 2)])
    return g, new, (discarded, capped)


def energy_from_overlaps(gamma, overlaps_with_z) -> float:
    """``Im sum_r gamma_r <Psi_0|Psi_r>^2`` given ``overlaps[r] = <Psi_r | Psi_0>``."""
    z = np.conj(np.asarray(overlaps_with_z, complex))
    return float(np.imag(np.sum(np.asarray(gamma) * z**2)))


def nu_mps(angles: Angles, d: int, policy: TruncationPolicy | None = None,
           workers: int = 1, record_profile: bool = False):
    """Energy via the spin-boson tensor-train simulation.

    Returns ``(nu, diagnostics)``; ``diagnostics.gherm`` is the full
    (p+1)x(p+1) overlap matrix with the final Z-inserted state last.
    """
    if d < 2:
        raise ValueError("Fock dimension must be >= 2")
    policy = policy or TruncationPolicy()
    p = angles.p
    diag = Diagnostics(d, policy)
    t_start = time.perf_counter()
    factor = LFactor.start(p)
    registry: list = []
    for l in range(1, p + 1):
        t0 = time.perf_counter()
        alpha = np.zeros(p, complex)
        alpha[:l] = -1j * angles.gamma[l - 1] * factor.L[:l, l - 1]
        g, registry, (discarded, capped) = apply_layer(
            registry, alpha, angles.beta[l - 1], policy, d=d, workers=workers,
            consume=True)
        factor = grow_l(factor, g)
        bond = max(st.max_bond for st in registry)
        diag.layers.append(LayerStats(l, bond, discarded, capped,
                                      time.perf_counter() - t0))
        if record_profile:
            diag.bond_profile.append((f"layer{l}", registry[-1].psi0.bond_dims))
    diag.min_norm_sq = min(st.norm_sq for st in registry)
    diag.final_overlaps = g
    diag.gherm = factor.gram
    diag.l_factor = factor.L.copy()
    diag.walltime = time.perf_counter() - t_start
    nu = energy_from_overlaps(angles.gamma, g)
    return nu, diag
