"""Index conventions, QAOA angles, the f tensors and the G-matrix container.

Signed time indices run over ``{1..p, 0, -p..-1}`` and are stored in exactly
that order, so row ``k`` of a stored matrix is the signed index
``storage_order(p)[k]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Angles",
    "GMatrix",
    "offset",
    "storage_order",
    "gamma_signed",
    "gamma_vector",
    "x_rotation_element",
    "f_two_sided",
    "f_one_sided",
    "f_link_betas",
    "check_symmetries",
    "hermitian_corner",
    "read_angles",
    "write_angles",
]

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class Angles:
    """QAOA angles ``gamma`` (cost) and ``beta`` (mixer), one per layer."""

    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=float).reshape(-1)
        beta = np.array(self.beta, dtype=float).reshape(-1)
        if gamma.size < 1:
            raise ValueError("need at least one layer (p >= 1)")
        if gamma.size != beta.size:
            raise ValueError(
                f"gamma and beta lengths differ ({gamma.size} != {beta.size})"
            )
        if not (np.all(np.isfinite(gamma)) and np.all(np.isfinite(beta))):
            raise ValueError("angles must be finite")
        gamma.flags.writeable = False
        beta.flags.writeable = False
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "beta", beta)

    @property
    def p(self) -> int:
        return self.gamma.size

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.gamma, self.beta])

    @classmethod
    def from_vector(cls, x) -> "Angles":
        x = np.asarray(x, dtype=float)
        if x.size % 2:
            raise ValueError("angle vector must have even length")
        p = x.size // 2
        return cls(x[:p], x[p:])

    @classmethod
    def zeros(cls, p: int) -> "Angles":
        return cls(np.zeros(p), np.zeros(p))

    def __eq__(self, other):
        if not isinstance(other, Angles):
            return NotImplemented
        return np.array_equal(self.gamma, other.gamma) and np.array_equal(
            self.beta, other.beta
        )

    def __hash__(self):
        return hash((self.gamma.tobytes(), self.beta.tobytes()))


def offset(j: int, p: int) -> int:
    """Storage offset of signed index ``j`` in the order {1..p, 0, -p..-1}."""
    if not -p <= j <= p:
        raise IndexError(f"signed index {j} outside [-{p}, {p}]")
    if j > 0:
        return j - 1
    if j == 0:
        return p
    return 2 * p + 1 + j


def storage_order(p: int) -> np.ndarray:
    """Signed index held at each storage offset."""
    return np.array(list(range(1, p + 1)) + [0] + list(range(-p, 0)))


def gamma_signed(angles: Angles, j: int) -> float:
    p = angles.p
    if not -p <= j <= p:
        raise IndexError(f"signed index {j} outside [-{p}, {p}]")
    if j > 0:
        return float(angles.gamma[j - 1])
    if j < 0:
        return -float(angles.gamma[-j - 1])
    return 0.0


def gamma_vector(angles: Angles) -> np.ndarray:
    """Signed gammas laid out in storage order."""
    g = angles.gamma
    return np.concatenate([g, [0.0], -g[::-1]])


def x_rotation_element(a: int, b: int, beta: float, sign: int = 1) -> complex:
    """``<a| exp(i*sign*beta*X) |b>`` for ``a, b`` in {+1, -1}."""
    if a not in (1, -1) or b not in (1, -1):
        raise ValueError("bits must be +1 or -1")
    if a == b:
        return complex(np.cos(beta))
    return 1j * sign * np.sin(beta)


def f_link_betas(angles: Angles) -> tuple[np.ndarray, np.ndarray]:
    """Angle and rotation sign of each of the 2p links between neighbouring slots.

    Link ``s`` joins storage offsets ``s`` and ``s + 1``.
    """
    b = angles.beta
    betas = np.concatenate([b, b[::-1]])
    signs = np.concatenate([np.ones(angles.p), -np.ones(angles.p)])
    return betas, signs


def f_two_sided(a, angles: Angles) -> complex:
    """Two-sided f tensor of a (2p+1)-bit string given in storage order."""
    a = np.asarray(a)
    if a.shape != (2 * angles.p + 1,):
        raise ValueError(f"expected {2 * angles.p + 1} bits, got shape {a.shape}")
    betas, signs = f_link_betas(angles)
    value = 0.5 + 0j
    for s in range(2 * angles.p):
        value *= x_rotation_element(int(a[s]), int(a[s + 1]), betas[s], int(signs[s]))
    return value


def f_one_sided(a, angles: Angles) -> complex:
    """One-sided f tensor ``2^{-1/2} prod_t <a_{t+1}| exp(-i beta_t X) |a_t>``.

    ``a`` holds p+1 bits ``(a_1, ..., a_{p+1})``; the last bit is the spin after
    all layers.
    """
    a = np.asarray(a)
    if a.shape != (angles.p + 1,):
        raise ValueError(f"expected {angles.p + 1} bits, got shape {a.shape}")
    value = 1 / np.sqrt(2) + 0j
    for t in range(angles.p):
        value *= x_rotation_element(int(a[t + 1]), int(a[t]), angles.beta[t], -1)
    return value


@dataclass(frozen=True)
class GMatrix:
    """Complex (2p+1)x(2p+1) matrix indexed by signed time indices."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=complex)
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] % 2 == 0:
            raise ValueError(f"expected odd square matrix, got shape {e.shape}")
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)

    @property
    def p(self) -> int:
        return (self.entries.shape[0] - 1) // 2

    def __getitem__(self, jk) -> complex:
        j, k = jk
        return complex(self.entries[offset(j, self.p), offset(k, self.p)])

    @classmethod
    def zeros(cls, p: int) -> "GMatrix":
        return cls(np.zeros((2 * p + 1, 2 * p + 1), dtype=complex))


def hermitian_corner(G: GMatrix) -> np.ndarray:
    """(p+1)x(p+1) matrix ``H[r, s] = G[r, -s]`` over ``0 <= r, s <= p``."""
    p = G.p
    H = np.empty((p + 1, p + 1), dtype=complex)
    for r in range(p + 1):
        for s in range(p + 1):
            H[r, s] = G[r, -s]
    return H


def check_symmetries(G: GMatrix, tol: float = SYMMETRY_TOL) -> list[str]:
    """List every violated symmetry relation of a G iterate (empty when all hold)."""
    p = G.p
    E = G.entries
    out = []

    def close(x, y):
        return abs(x - y) <= tol

    asym = np.max(np.abs(E - E.T))
    if asym > tol:
        out.append(f"not symmetric (max |G - G^T| = {asym:.3e})")
    for j in range(-p, p + 1):
        if not close(G[j, j], 1.0):
            out.append(f"G[{j},{j}] = {G[j, j]:.6g} != 1")
        if j != 0 and not close(G[j, -j], 1.0):
            out.append(f"G[{j},{-j}] = {G[j, -j]:.6g} != 1")
    for r in range(1, p + 1):
        if not close(G[0, r], np.conj(G[0, -r])):
            out.append(f"G[0,{r}] != conj(G[0,{-r}])")
        for s in range(r + 1, p + 1):
            ref = G[r, s]
            if not close(ref, G[r, -s]):
                out.append(f"G[{r},{s}] != G[{r},{-s}]")
            if not close(ref, np.conj(G[-r, -s])):
                out.append(f"G[{r},{s}] != conj(G[{-r},{-s}])")
            if not close(ref, np.conj(G[-r, s])):
                out.append(f"G[{r},{s}] != conj(G[{-r},{s}])")
    return out


def read_angles(path) -> Angles:
    """Load an angle file: JSON object with ``p``, ``gamma`` and ``beta``."""
    doc = json.loads(Path(path).read_text())
    try:
        p, gamma, beta = int(doc["p"]), doc["gamma"], doc["beta"]
    except KeyError as exc:
        raise ValueError(f"{path}: missing field {exc}") from None
    if len(gamma) != p or len(beta) != p:
        raise ValueError(
            f"{path}: p={p} but len(gamma)={len(gamma)}, len(beta)={len(beta)}"
        )
    return Angles(gamma, beta)


def write_angles(path, angles: Angles, **extra) -> None:
    doc = {"p": angles.p, "gamma": angles.gamma.tolist(), "beta": angles.beta.tolist()}
    doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
