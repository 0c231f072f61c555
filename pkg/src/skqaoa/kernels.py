"""Backend selection for the exact-iteration bitstring sum.

The compiled extension is used when it was built; set ``SKQAOA_BACKEND=python``
to force the numpy implementation.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _kernels_py.bitstring_sum}
if _compiled is not None:
    BACKENDS["cython"] = _compiled.bitstring_sum

_requested = os.environ.get("SKQAOA_BACKEND", "").strip().lower()
if _requested and _requested not in BACKENDS:
    raise ImportError(
        f"SKQAOA_BACKEND={_requested!r} unavailable; choose from {sorted(BACKENDS)}"
    )
BACKEND = _requested or ("cython" if "cython" in BACKENDS else "python")


def _pairwise(parts):
    while len(parts) > 1:
        merged = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]


def bitstring_sum(G_prev, gamma_vec, link_betas, link_signs, use_exp,
                  workers=1, backend=None):
    """Full symmetric ``sum_a f(a) H(a) a a^T``.

    The range of bitstrings is cut into ``workers`` contiguous blocks whose
    partial sums are combined in a fixed pairwise tree, so the result is
    bitwise reproducible for a given worker count.
    """
    fn = BACKENDS[backend or BACKEND]
    n = len(gamma_vec)
    total = 1 << n
    workers = max(1, min(int(workers), total))
    bounds = np.linspace(0, total, workers + 1).astype(np.int64)
    args = (G_prev, gamma_vec, link_betas, link_signs, bool(use_exp))
    if workers == 1:
        parts = [fn(*args, 0, total)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fn, *args, int(lo), int(hi))
                       for lo, hi in zip(bounds[:-1], bounds[1:])]
            parts = [fut.result() for fut in futures]
    upper = _pairwise(parts)
    return upper + np.triu(upper, 1).T
