# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bitstring sum for the exact G-matrix iteration.

Bit ``b`` of the enumeration integer is storage slot ``b``; a set bit means -1.

Strings are processed in aligned blocks of ``2^c`` that share their high
bits.  Within a block the weights are generated in Gray-code order so the
quadratic form changes by one rank-one update per string, and the second
moments ``sum_a w(a) a_j a_k`` are read off a Walsh-Hadamard transform of the
weight buffer.  Both steps are O(n) per string instead of O(n^2).
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)

cnp.import_array()

DEF MAX_SLOTS = 64
# the quadratic form is recomputed exactly every 2^RESYNC_BITS Gray steps
DEF RESYNC_BITS = 6


cdef inline double _sign(long long idx, int j) noexcept nogil:
    return -1.0 if (idx >> j) & 1 else 1.0


cdef double complex _weight(long long idx, int n, const double complex[::1] same,
                            const double complex[::1] diff) noexcept nogil:
    cdef double complex f = 0.5
    cdef int j
    for j in range(n - 1):
        if ((idx >> j) ^ (idx >> (j + 1))) & 1:
            f = f * diff[j]
        else:
            f = f * same[j]
    return f


cdef void _exact_form(long long idx, int n, const double complex[:, ::1] G,
                      const double[::1] gam, double* v, double complex* r,
                      double complex* q) noexcept nogil:
    cdef int j, k
    cdef double complex acc = 0
    for j in range(n):
        v[j] = gam[j] * _sign(idx, j)
    for j in range(n):
        r[j] = 0
        for k in range(n):
            if v[k] != 0:
                r[j] = r[j] + G[j, k] * v[k]
        acc = acc + v[j] * r[j]
    q[0] = acc


cdef void _direct(long long start, long long stop, int n,
                  const double complex[:, ::1] G, const double[::1] gam,
                  const double complex[::1] same, const double complex[::1] diff,
                  bint use_exp, double complex[:, ::1] acc) noexcept nogil:
    # plain per-string accumulation for ranges that are not block aligned
    cdef long long idx
    cdef int j, k
    cdef double v[MAX_SLOTS]
    cdef double complex r[MAX_SLOTS]
    cdef double complex f, q
    for idx in range(start, stop):
        f = _weight(idx, n, same, diff)
        if f == 0:
            continue
        if use_exp:
            _exact_form(idx, n, G, gam, v, r, &q)
            f = f * cexp(-0.5 * q)
        for j in range(n):
            for k in range(j, n):
                if _sign(idx, j) == _sign(idx, k):
                    acc[j, k] = acc[j, k] + f
                else:
                    acc[j, k] = acc[j, k] - f


cdef void _block(long long base, int c, int n,
                 const double complex[:, ::1] G, const double[::1] gam,
                 const double complex[::1] same, const double complex[::1] diff,
                 bint use_exp, double complex* buf, double complex[:, ::1] acc) noexcept nogil:
    cdef long long size = 1LL << c
    cdef long long i, gray, h, x, y
    cdef int t, j, k
    cdef double v[MAX_SLOTS]
    cdef double complex r[MAX_SLOTS]
    cdef double complex q, f, delta, u, w
    cdef double sj, sk
    q = 0
    for i in range(size):
        gray = i ^ (i >> 1)
        f = _weight(base | gray, n, same, diff)
        if use_exp:
            if (i & ((1 << RESYNC_BITS) - 1)) == 0:
                _exact_form(base | gray, n, G, gam, v, r, &q)
            else:
                # bit t flipped between the previous Gray word and this one
                t = 0
                while not ((i >> t) & 1):
                    t += 1
                if v[t] != 0:
                    delta = -2.0 * v[t]
                    q = q + 2.0 * delta * r[t] + delta * delta * G[t, t]
                    for j in range(n):
                        r[j] = r[j] + G[j, t] * delta
                    v[t] = -v[t]
            if f != 0:
                f = f * cexp(-0.5 * q)
        buf[gray] = f
    # in-place unnormalised Walsh-Hadamard transform
    h = 1
    while h < size:
        x = 0
        while x < size:
            for y in range(x, x + h):
                u = buf[y]
                w = buf[y + h]
                buf[y] = u + w
                buf[y + h] = u - w
            x += 2 * h
        h *= 2
    for j in range(n):
        for k in range(j, n):
            if k < c:
                # both slots vary inside the block
                if j == k:
                    acc[j, k] = acc[j, k] + buf[0]
                else:
                    acc[j, k] = acc[j, k] + buf[(1LL << j) | (1LL << k)]
            elif j < c:
                acc[j, k] = acc[j, k] + _sign(base, k) * buf[1LL << j]
            else:
                sj = _sign(base, j)
                sk = _sign(base, k)
                acc[j, k] = acc[j, k] + sj * sk * buf[0]


def bitstring_sum(G_prev, gamma_vec, link_betas, link_signs, bint use_exp,
                  long long start=0, long long stop=-1, int block_bits=12):
    """Upper triangle of ``sum_a f(a) H(a) a a^T`` over bitstrings ``[start, stop)``."""
    cdef int n = gamma_vec.shape[0]
    if n > MAX_SLOTS - 1:
        raise ValueError("too many slots for the compiled kernel")
    if stop < 0:
        stop = 1LL << n
    cdef const double complex[:, ::1] G = np.ascontiguousarray(G_prev, dtype=np.complex128)
    cdef const double[::1] gam = np.ascontiguousarray(gamma_vec, dtype=np.float64)
    betas = np.asarray(link_betas, dtype=np.float64)
    signs = np.asarray(link_signs, dtype=np.float64)
    cdef const double complex[::1] same = np.ascontiguousarray(np.cos(betas) + 0j)
    cdef const double complex[::1] diff = np.ascontiguousarray(1j * signs * np.sin(betas))
    out = np.zeros((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] acc = out
    cdef int c = min(n, max(block_bits, 0))
    cdef long long size = 1LL << c
    cdef long long lo = ((start + size - 1) // size) * size
    cdef long long hi = (stop // size) * size
    cdef long long base
    cdef double complex* buf
    if c == 0 or lo >= hi:
        with nogil:
            _direct(start, stop, n, G, gam, same, diff, use_exp, acc)
        return out
    buf = <double complex*> malloc(size * sizeof(double complex))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            _direct(start, lo, n, G, gam, same, diff, use_exp, acc)
            base = lo
            while base < hi:
                _block(base, c, n, G, gam, same, diff, use_exp, buf, acc)
                base += size
            _direct(hi, stop, n, G, gam, same, diff, use_exp, acc)
    finally:
        free(buf)
    return out
