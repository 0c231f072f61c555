"""Exact G-matrix iteration for the infinite-size SK QAOA energy.

Cost is ``O(4^p (2p+1)^2)`` per step, so this is a small-p reference only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .gmatrix import Angles, GMatrix, f_link_betas, gamma_vector, offset

__all__ = ["P_CAP", "ExactCapError", "IterationTrace", "g0", "g_step", "nu_exact",
           "nu_from_g", "dump_iterates"]

P_CAP = 12


class ExactCapError(ValueError):
    """Requested depth exceeds the brute-force cap."""


@dataclass(frozen=True)
class IterationTrace:
    iterates: list = field(repr=False)
    nu: float
    imag_residue: float = 0.0

    @property
    def final(self) -> GMatrix:
        return self.iterates[-1]


def _check_cap(angles: Angles, p_cap: int | None):
    cap = P_CAP if p_cap is None else p_cap
    if angles.p > cap:
        raise ExactCapError(
            f"p={angles.p} exceeds cap {cap} (cost ~ 4^p (2p+1)^2); raise p_cap to override"
        )


def _sum(G_prev, angles, use_exp, workers, backend):
    betas, signs = f_link_betas(angles)
    out = kernels.bitstring_sum(G_prev, gamma_vector(angles), betas, signs, use_exp,
                                workers=workers, backend=backend)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite entry in G iterate")
    return GMatrix(out)


def g0(angles: Angles, *, p_cap=None, workers=1, backend=None) -> GMatrix:
    """Initial iterate ``G0[j,k] = sum_a f(a) a_j a_k``."""
    _check_cap(angles, p_cap)
    n = 2 * angles.p + 1
    return _sum(np.zeros((n, n), complex), angles, False, workers, backend)


def g_step(G_prev: GMatrix, angles: Angles, *, p_cap=None, workers=1,
           backend=None) -> GMatrix:
    """One recursion step, weighting string ``a`` by ``f(a) exp(-v^T G_prev v / 2)``
    with ``v = gamma_vector * a``."""
    _check_cap(angles, p_cap)
    if G_prev.p != angles.p:
        raise ValueError(f"G has p={G_prev.p}, angles have p={angles.p}")
    return _sum(G_prev.entries, angles, True, workers, backend)


def nu_from_g(G: GMatrix, angles: Angles) -> tuple[float, float]:
    """Energy ``(i/2) sum_j Gamma_j G[0,j]^2``; returns (real part, |imag part|)."""
    p = angles.p
    row = G.entries[offset(0, p)]
    val = 0.5j * np.sum(gamma_vector(angles) * row**2)
    return float(val.real), float(abs(val.imag))


def nu_exact(angles: Angles, *, p_cap=None, workers=1, backend=None) -> IterationTrace:
    """Run ``g0`` followed by ``p`` recursion steps and evaluate the energy.

    ``iterates[m]`` is ``G^(m)`` for ``m = 0..p``.
    """
    G = g0(angles, p_cap=p_cap, workers=workers, backend=backend)
    iterates = [G]
    for _ in range(angles.p):
        G = g_step(G, angles, p_cap=p_cap, workers=workers, backend=backend)
        iterates.append(G)
    nu, residue = nu_from_g(G, angles)
    if residue > 1e-10:
        raise FloatingPointError(f"energy has imaginary residue {residue:.3e}")
    return IterationTrace(iterates, nu, residue)


def dump_iterates(trace: IterationTrace, path) -> None:
    """CSV with one row per (m, row, col) holding the real and imaginary parts."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "j", "k", "re", "im"])
        for m, G in enumerate(trace.iterates):
            order = list(range(1, G.p + 1)) + [0] + list(range(-G.p, 0))
            for a, j in enumerate(order):
                for b, k in enumerate(order):
                    z = G.entries[a, b]
                    w.writerow([m, j, k, repr(float(z.real)), repr(float(z.imag))])
