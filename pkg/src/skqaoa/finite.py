"""Exact statevector QAOA on finite Sherrington-Kirkpatrick instances.

Couplings come from a counter-based generator: the Gaussian for pair
``j < k`` is a Box-Muller transform of the two Philox outputs at counter
position ``k (k - 1) / 2 + j`` under key ``seed``.  That position does not
depend on ``n``, so an instance on ``n`` spins is the leading block of the
instance with the same seed on more spins.

The ansatz is ``prod_t exp(-i beta_t B) exp(-i gamma_t C) |+>^n`` with
``B = sum_j X_j`` and ``C = -(1/sqrt n) sum_{j<k} J_jk Z_j Z_k``.  The sign of
``C`` is chosen so that positive angles drive the state toward large ``C``,
matching the sign convention of the infinite-size energy; approximation
ratio and success probability therefore refer to maximising ``C``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .gmatrix import Angles

__all__ = [
    "N_CAP",
    "SkInstance",
    "InstanceResult",
    "cost_vector",
    "qaoa_state",
    "simulate",
    "expectation_by_enumeration",
    "success_decay_fit",
    "run_grid",
    "write_grid",
]

N_CAP = 24
_DEGENERACY_TOL = 1e-9


def _pair_gaussians(seed: int, count: int) -> np.ndarray:
    gen = np.random.Philox(key=int(seed) & (2**128 - 1))
    raw = gen.random_raw(2 * count).reshape(-1, 2)
    u = ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53
    return np.sqrt(-2.0 * np.log(u[:, 0])) * np.cos(2.0 * math.pi * u[:, 1])


@dataclass(frozen=True)
class SkInstance:
    n: int
    seed: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two spins")

    @cached_property
    def couplings(self) -> np.ndarray:
        """Strictly upper-triangular ``J`` with standard normal entries."""
        n = self.n
        z = _pair_gaussians(self.seed, n * (n - 1) // 2)
        J = np.zeros((n, n))
        for k in range(1, n):
            base = k * (k - 1) // 2
            J[:k, k] = z[base:base + k]
        return J


def cost_vector(instance: SkInstance) -> np.ndarray:
    """``C(z)`` for every basis string, qubit ``j`` being bit ``j`` of the index."""
    n = instance.n
    if n > N_CAP:
        raise ValueError(f"n={n} exceeds the statevector cap {N_CAP}")
    J = instance.couplings
    z = np.arange(2**n, dtype=np.int64)
    spins = [1 - 2 * ((z >> j) & 1).astype(np.int8) for j in range(n)]
    C = np.zeros(2**n)
    for j in range(n):
        acc = np.zeros(2**n)
        for k in range(j + 1, n):
            acc += J[j, k] * spins[k]
        C += spins[j] * acc
    return -C / math.sqrt(n)


def _mixer(psi: np.ndarray, n: int, beta: float) -> np.ndarray:
    c, s = math.cos(beta), math.sin(beta)
    for q in range(n):
        v = psi.reshape(-1, 2, 2**q)
        a, b = v[:, 0, :].copy(), v[:, 1, :]
        v[:, 0, :] = c * a - 1j * s * b
        v[:, 1, :] = c * b - 1j * s * a
    return psi


def qaoa_state(cost: np.ndarray, n: int, angles: Angles) -> np.ndarray:
    psi = np.full(2**n, 2.0 ** (-n / 2), dtype=complex)
    for g, b in zip(angles.gamma, angles.beta):
        psi *= np.exp(-1j * g * cost)
        psi = _mixer(psi, n, b)
    return psi


@dataclass(frozen=True)
class InstanceResult:
    n: int
    seed: int
    p: int
    energy: float
    e_min: float
    e_max: float
    ar: float
    p_success: float


def simulate(instance: SkInstance, angles: Angles, cost=None) -> InstanceResult:
    """Run the ansatz and score it against the exact extremes of ``C``.

    ``p_success`` sums the probability of every string attaining the maximum,
    so both members of the global-flip pair are counted.  Pass a precomputed
    ``cost`` vector to skip rebuilding it.
    """
    n = instance.n
    if cost is None:
        cost = cost_vector(instance)
    psi = qaoa_state(cost, n, angles)
    prob = np.abs(psi) ** 2
    energy = float(prob @ cost)
    e_min, e_max = float(cost.min()), float(cost.max())
    span = e_max - e_min
    ar = (energy - e_min) / span if span > 0 else math.nan
    best = cost >= e_max - _DEGENERACY_TOL * max(1.0, abs(e_max))
    return InstanceResult(n, instance.seed, angles.p, energy, e_min, e_max, ar,
                          float(prob[best].sum()))


def expectation_by_enumeration(instance: SkInstance, angles: Angles) -> float:
    """``<C>`` from an explicit loop over strings and couplings (independent path)."""
    n = instance.n
    psi = qaoa_state(cost_vector(instance), n, angles)
    J = instance.couplings
    total = 0.0
    for z in range(2**n):
        s = [1 - 2 * ((z >> j) & 1) for j in range(n)]
        c = sum(J[j, k] * s[j] * s[k] for j in range(n) for k in range(j + 1, n))
        total += abs(psi[z]) ** 2 * (-c / math.sqrt(n))
    return total


def success_decay_fit(ns, probabilities):
    """Fit ``P(n) = A 2^(-kappa n)`` by least squares on ``log2 P``.

    Args:
        ns: system sizes (at least four distinct values).
        probabilities: mean success probability per size.

    Returns:
        ``(kappa, A)``.
    """
    ns = np.asarray(ns, dtype=float)
    P = np.asarray(probabilities, dtype=float)
    if np.unique(ns).size < 4:
        raise ValueError("need at least four distinct n")
    if np.any(P <= 0):
        raise ValueError("success probabilities must be positive")
    slope, intercept = np.polyfit(ns, np.log2(P), 1)
    return float(-slope), float(2.0**intercept)


def run_grid(n_list, angle_map: dict, instances: int = 200, seed: int = 0,
             workers: int = 1) -> list[dict]:
    """Mean and standard error of AR and success probability per ``(n, p)`` cell.

    Instance ``i`` uses seed ``seed * 1_000_003 + i`` for every ``n``.
    """
    ps_sorted = sorted(angle_map)

    def one(inst):
        cost = cost_vector(inst)
        return [simulate(inst, angle_map[p], cost) for p in ps_sorted]

    rows = []
    for n in n_list:
        insts = [SkInstance(n, seed * 1_000_003 + i) for i in range(instances)]
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                per_inst = list(pool.map(one, insts))
        else:
            per_inst = [one(i) for i in insts]
        for col, p in enumerate(ps_sorted):
            res = [r[col] for r in per_inst]
            ar = np.array([r.ar for r in res])
            ps = np.array([r.p_success for r in res])
            k = len(res)
            rows.append(dict(n=n, p=p, instances=k,
                             mean_ar=float(np.nanmean(ar)),
                             stderr_ar=float(np.nanstd(ar, ddof=1) / math.sqrt(k)),
                             mean_p_success=float(ps.mean()),
                             stderr_p_success=float(ps.std(ddof=1) / math.sqrt(k))))
    return rows


def write_grid(path, rows) -> None:
    cols = ["n", "p", "instances", "mean_ar", "stderr_ar", "mean_p_success",
            "stderr_p_success"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({c: r[c] for c in cols})
