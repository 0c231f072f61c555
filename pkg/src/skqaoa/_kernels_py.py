"""Pure numpy fallback for the compiled bitstring sum."""

import numpy as np

CHUNK = 1 << 15


def bitstring_sum(G_prev, gamma_vec, link_betas, link_signs, use_exp, start=0, stop=-1):
    """Upper triangle of ``sum_a f(a) H(a) a a^T`` over bitstrings ``[start, stop)``."""
    n = len(gamma_vec)
    if stop < 0:
        stop = 1 << n
    G = np.asarray(G_prev, dtype=complex)
    gam = np.asarray(gamma_vec, dtype=float)
    betas = np.asarray(link_betas, dtype=float)
    same = np.cos(betas) + 0j
    diff = 1j * np.asarray(link_signs, dtype=float) * np.sin(betas)
    shifts = np.arange(n, dtype=np.int64)
    acc = np.zeros((n, n), dtype=complex)
    for lo in range(start, stop, CHUNK):
        idx = np.arange(lo, min(lo + CHUNK, stop), dtype=np.int64)
        a = 1.0 - 2.0 * ((idx[:, None] >> shifts) & 1)
        eq = a[:, :-1] == a[:, 1:]
        f = 0.5 * np.prod(np.where(eq, same, diff), axis=1)
        if use_exp:
            v = a * gam
            q = np.einsum("ij,ij->i", v @ G.T, v)
            f = f * np.exp(-0.5 * q)
        acc += (a * f[:, None]).T @ a
    return np.triu(acc)
