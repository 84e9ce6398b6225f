# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled exponential RK4 march for phi' = D phi + U(x) phi with diagonal D."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF NMAX = 16


cdef inline void _apply(const double complex[:, :] U, double complex* p, double complex* out, int n) noexcept nogil:
    cdef int i, j
    cdef double complex s
    for i in range(n):
        s = 0
        for j in range(n):
            s = s + U[i, j] * p[j]
        out[i] = s


def march_etd4(const double complex[:, :, :] U_nodes, const double complex[:, :, :] U_mid,
               const double complex[:, :] coef, const double complex[:] p0):
    """March from node 0 to node m-1 of the given (possibly reversed) arrays.

    ``coef`` rows are (E, E2, Q, f1, f2, f3).  Returns an (m, n) array of
    states, with row 0 equal to ``p0``.
    """
    cdef int m = U_nodes.shape[0]
    cdef int n = U_nodes.shape[1]
    if n > NMAX:
        raise ValueError(f"system size {n} exceeds compiled limit {NMAX}")
    out_arr = np.empty((m, n), dtype=np.complex128)
    cdef double complex[:, :] out = out_arr
    cdef double complex p[NMAX]
    cdef double complex a[NMAX]
    cdef double complex b[NMAX]
    cdef double complex c[NMAX]
    cdef double complex Na[NMAX]
    cdef double complex Nb[NMAX]
    cdef double complex Nc[NMAX]
    cdef double complex Nd[NMAX]
    cdef int s, i
    with nogil:
        for i in range(n):
            p[i] = p0[i]
            out[0, i] = p[i]
        for s in range(m - 1):
            _apply(U_nodes[s], p, Na, n)
            for i in range(n):
                a[i] = coef[1, i] * p[i] + coef[2, i] * Na[i]
            _apply(U_mid[s], a, Nb, n)
            for i in range(n):
                b[i] = coef[1, i] * p[i] + coef[2, i] * Nb[i]
            _apply(U_mid[s], b, Nc, n)
            for i in range(n):
                c[i] = coef[1, i] * a[i] + coef[2, i] * (2.0 * Nc[i] - Na[i])
            _apply(U_nodes[s + 1], c, Nd, n)
            for i in range(n):
                p[i] = (coef[0, i] * p[i] + coef[3, i] * Na[i]
                        + 2.0 * coef[4, i] * (Nb[i] + Nc[i]) + coef[5, i] * Nd[i])
                out[s + 1, i] = p[i]
    return out_arr
