"""Open-boundary tensor trains over bosonic sites.

Site tensors have shape ``(left_bond, d, right_bond)`` and the outer bonds are
1.  Every operation returns a new train; inputs are never modified.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

__all__ = [
    "TensorTrain",
    "TruncationPolicy",
    "CompressionReport",
    "product_state",
    "apply_local",
    "apply_product",
    "add",
    "scale",
    "compress",
    "canonicalize_left",
    "overlap",
    "norm",
    "to_dense",
    "from_dense",
    "is_left_isometry",
    "write_bond_profile",
]


@dataclass(frozen=True)
class TensorTrain:
    sites: tuple

    def __post_init__(self):
        sites = tuple(np.asarray(s, dtype=complex) for s in self.sites)
        if not sites:
            raise ValueError("a tensor train needs at least one site")
        d = sites[0].shape[1]
        for i, s in enumerate(sites):
            if s.ndim != 3:
                raise ValueError(f"site {i} is not rank 3")
            if s.shape[1] != d:
                raise ValueError(f"site {i} has physical dimension {s.shape[1]} != {d}")
        if sites[0].shape[0] != 1 or sites[-1].shape[2] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        for i in range(len(sites) - 1):
            if sites[i].shape[2] != sites[i + 1].shape[0]:
                raise ValueError(f"bond mismatch between sites {i} and {i + 1}")
        object.__setattr__(self, "sites", sites)

    @property
    def p(self) -> int:
        return len(self.sites)

    @property
    def d(self) -> int:
        return self.sites[0].shape[1]

    @property
    def bond_dims(self) -> list[int]:
        return [s.shape[2] for s in self.sites[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)


@dataclass(frozen=True)
class TruncationPolicy:
    """Singular values below ``svd_cutoff`` (relative to the largest at that bond,
    or absolute) are dropped; then at most ``max_bond`` are kept.

    A relative cutoff always keeps the leading value.  An absolute cutoff may
    remove every value at a bond, which turns the train into the zero state.
    """

    svd_cutoff: float = 0.0
    max_bond: int | None = None
    absolute: bool = False

    def __post_init__(self):
        if not 0 <= self.svd_cutoff < 1:
            raise ValueError("svd_cutoff must lie in [0, 1)")
        if self.max_bond is not None and self.max_bond < 1:
            raise ValueError("max_bond must be positive")


@dataclass
class CompressionReport:
    discarded: list = field(default_factory=list)
    cap_active: bool = False

    @property
    def discarded_weight(self) -> float:
        return float(sum(self.discarded))


def _check_same(a: TensorTrain, b: TensorTrain):
    if a.p != b.p or a.d != b.d:
        raise ValueError(f"shape mismatch: (p={a.p}, d={a.d}) vs (p={b.p}, d={b.d})")


def product_state(site_vectors, tol: float = 1e-12) -> TensorTrain:
    sites = []
    for i, v in enumerate(site_vectors):
        v = np.asarray(v, dtype=complex).reshape(-1)
        if abs(np.linalg.norm(v) - 1) > tol:
            raise ValueError(f"site vector {i} is not normalised")
        sites.append(v.reshape(1, -1, 1))
    return TensorTrain(tuple(sites))


def apply_local(tt: TensorTrain, site: int, op) -> TensorTrain:
    op = np.asarray(op)
    if not 0 <= site < tt.p:
        raise IndexError(f"site {site} outside [0, {tt.p})")
    if op.shape != (tt.d, tt.d):
        raise ValueError(f"operator shape {op.shape} does not match d={tt.d}")
    sites = list(tt.sites)
    sites[site] = np.einsum("ij,ljr->lir", op, sites[site])
    return TensorTrain(tuple(sites))


def apply_product(tt: TensorTrain, ops) -> TensorTrain:
    """Apply one operator per site (``None`` leaves a site untouched)."""
    if len(ops) != tt.p:
        raise ValueError(f"need {tt.p} operators, got {len(ops)}")
    sites = []
    for A, op in zip(tt.sites, ops):
        sites.append(A if op is None else np.einsum("ij,ljr->lir", op, A))
    return TensorTrain(tuple(sites))


def scale(tt: TensorTrain, c: complex) -> TensorTrain:
    sites = list(tt.sites)
    sites[0] = sites[0] * c
    return TensorTrain(tuple(sites))


def add(a: TensorTrain, ca: complex, b: TensorTrain, cb: complex) -> TensorTrain:
    """Exact ``ca*a + cb*b`` by direct sum of bonds."""
    _check_same(a, b)
    p = a.p
    if p == 1:
        return TensorTrain((ca * a.sites[0] + cb * b.sites[0],))
    sites = []
    for i, (A, B) in enumerate(zip(a.sites, b.sites)):
        if i == 0:
            sites.append(np.concatenate([ca * A, cb * B], axis=2))
        elif i == p - 1:
            sites.append(np.concatenate([A, B], axis=0))
        else:
            la, d, ra = A.shape
            lb, _, rb = B.shape
            C = np.zeros((la + lb, d, ra + rb), dtype=complex)
            C[:la, :, :ra] = A
            C[la:, :, ra:] = B
            sites.append(C)
    return TensorTrain(tuple(sites))


def canonicalize_left(tt: TensorTrain) -> TensorTrain:
    """QR sweep leaving sites 0..p-2 as left isometries; the norm sits on the last site."""
    sites = list(tt.sites)
    for i in range(tt.p - 1):
        l, d, r = sites[i].shape
        Q, R = np.linalg.qr(sites[i].reshape(l * d, r))
        sites[i] = Q.reshape(l, d, -1)
        sites[i + 1] = np.tensordot(R, sites[i + 1], axes=(1, 0))
    return TensorTrain(tuple(sites))


def is_left_isometry(A, tol: float = 1e-12) -> bool:
    l, d, r = A.shape
    M = A.reshape(l * d, r)
    return bool(np.max(np.abs(M.conj().T @ M - np.eye(r))) <= tol)


def _svd(M):
    try:
        return np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError:
        return sla.svd(M, full_matrices=False, lapack_driver="gesvd")


def _keep(s, policy: TruncationPolicy) -> tuple[int, bool]:
    """Number of singular values to keep (0 only when an absolute cutoff removes all)."""
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return 1, False
    thresh = policy.svd_cutoff if policy.absolute else policy.svd_cutoff * smax
    keep = int(np.count_nonzero(s >= thresh))
    if not policy.absolute:
        keep = max(1, keep)
    capped = policy.max_bond is not None and keep > policy.max_bond
    if capped:
        keep = policy.max_bond
    return keep, capped


def compress(tt: TensorTrain, policy: TruncationPolicy,
             canonical: bool = False) -> tuple[TensorTrain, CompressionReport]:
    """Left QR sweep then a right-to-left truncated SVD sweep.

    Returns the compressed train and per-bond discarded weight (sum of the
    squared dropped singular values).  Pass ``canonical=True`` to skip the QR
    sweep when ``tt`` is already left-canonical.
    """
    if not canonical:
        tt = canonicalize_left(tt)
    sites = list(tt.sites)
    report = CompressionReport(discarded=[0.0] * (tt.p - 1))
    for i in range(tt.p - 1, 0, -1):
        l, d, r = sites[i].shape
        U, s, Vh = _svd(sites[i].reshape(l, d * r))
        keep, capped = _keep(s, policy)
        report.cap_active |= capped
        report.discarded[i - 1] = float(np.sum(s[keep:] ** 2))
        if keep == 0:
            # nothing survives: a bond of one zero singular value (the zero state)
            keep, s = 1, np.zeros_like(s)
        sites[i] = Vh[:keep].reshape(keep, d, r)
        sites[i - 1] = np.tensordot(sites[i - 1], U[:, :keep] * s[:keep], axes=(2, 0))
    return TensorTrain(tuple(sites)), report


def overlap(a: TensorTrain, b: TensorTrain) -> complex:
    """``<a|b>`` by a left-to-right transfer contraction."""
    _check_same(a, b)
    E = np.ones((1, 1), dtype=complex)
    for A, B in zip(a.sites, b.sites):
        T = np.tensordot(E, B, axes=(1, 0))  # (la, d, rb)
        E = np.tensordot(A.conj(), T, axes=([0, 1], [0, 1]))
    return complex(E[0, 0])


def norm(tt: TensorTrain) -> float:
    return float(np.sqrt(max(overlap(tt, tt).real, 0.0)))


def to_dense(tt: TensorTrain) -> np.ndarray:
    """Full state vector, site 0 as the most significant index."""
    v = tt.sites[0].reshape(tt.d, -1)
    for A in tt.sites[1:]:
        v = np.tensordot(v, A, axes=(1, 0)).reshape(-1, A.shape[2])
    return v.reshape(-1)


def from_dense(vec, p: int, d: int) -> TensorTrain:
    """Exact tensor train of a dense vector by successive SVDs."""
    vec = np.asarray(vec, dtype=complex)
    if vec.size != d**p:
        raise ValueError("vector length is not d**p")
    sites = []
    rest = vec.reshape(1, -1)
    for _ in range(p - 1):
        l = rest.shape[0]
        U, s, Vh = np.linalg.svd(rest.reshape(l * d, -1), full_matrices=False)
        sites.append(U.reshape(l, d, -1))
        rest = s[:, None] * Vh
    sites.append(rest.reshape(rest.shape[0], d, 1))
    return TensorTrain(tuple(sites))


def write_bond_profile(path, rows) -> None:
    """CSV of ``(label, bond, dim)`` rows for diagnostics."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "bond", "dim"])
        for label, dims in rows:
            for b, chi in enumerate(dims):
                w.writerow([label, b, chi])
