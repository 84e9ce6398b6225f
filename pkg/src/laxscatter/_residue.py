"""Exact Fourier-side evaluation of traces of resolvent words.

For resolvents R_c = (d/dx - z_c)^{-1} with symbol 1/(i xi - z_c) and
multipliers f_1..f_l,

    tr(R_1 f_1 R_2 f_2 ... R_l f_l)
        = (2 pi)^(-l/2) int prod_j f_hat_j(d_j) * C(s) d^{l-1}d,

with d_l = -(d_1 + ... + d_{l-1}) and s_j = d_j + ... + d_l.  The inner
integral C(s) = int prod_j 1/(i(eta + s_j) - z_j) d eta is a rational
integral evaluated by residues, closing the contour on the half plane that
holds at most two poles.
"""

from __future__ import annotations

import numpy as np

CHUNK_ELEMENTS = 200000


def center_integral(s, z):
    """int prod_j 1/(i(eta + s_j) - z_j) d eta, broadcasting over the s_j arrays.

    Poles sit at eta = -s_j - i z_j, in the upper half plane when Re z_j < 0.
    """
    l = len(z)
    poles = [-sj - 1j * zj for sj, zj in zip(s, z)]
    upper = [j for j in range(l) if z[j].real < 0]
    lower = [j for j in range(l) if z[j].real > 0]
    if len(upper) + len(lower) != l:
        raise ValueError("resolvent poles need Re z != 0")
    if not upper or not lower:
        return np.zeros(np.broadcast(*s).shape, dtype=complex)
    if len(upper) <= len(lower):
        nodes, others, sign = upper, lower, 2j * np.pi
    else:
        nodes, others, sign = lower, upper, -2j * np.pi
    if len(nodes) > 2 or (len(nodes) == 2 and len(others) > 2):
        raise NotImplementedError("words with more than two poles on both sides are not supported")
    p_other = [poles[m] for m in others]
    if len(nodes) == 1:
        a = poles[nodes[0]]
        val = 1.0
        for p in p_other:
            val = val / (a - p)
    else:
        # divided difference (g(a) - g(b)) / (a - b) of g = 1 / prod(eta - p),
        # written so that it stays regular when a and b coincide
        a, b = poles[nodes[0]], poles[nodes[1]]
        if len(p_other) == 1:
            (p1,) = p_other
            val = -1.0 / ((a - p1) * (b - p1))
        else:
            p1, p2 = p_other
            val = -(a + b - p1 - p2) / ((a - p1) * (a - p2) * (b - p1) * (b - p2))
    return sign * val * (1j) ** (-l)


def band_slice(spectra, rel_tol: float) -> slice:
    """Smallest centered window holding every coefficient above rel_tol * max."""
    n = len(spectra[0])
    c = n // 2
    mags = sum(np.abs(F) for F in spectra)
    top = mags.max()
    if top == 0:
        return slice(c, c)
    sel = np.flatnonzero(mags > rel_tol * top)
    half = min(max(c - sel[0], sel[-1] - c) + 1, c)
    return slice(c - half, c + half)


def trace_word(z, spectra, dxi: float, band_tol: float | None = None) -> complex:
    """tr(R_{z_1} f_1 ... R_{z_l} f_l) from unitary spectra on the centered grid.

    ``spectra`` are arrays on the ascending frequency grid whose middle entry
    is xi = 0.  With ``band_tol`` the sums run over the centered band where
    some spectrum exceeds band_tol times its peak.
    """
    l = len(z)
    if l != len(spectra):
        raise ValueError("one spectrum per resolvent is required")
    if l < 2:
        raise ValueError("words of length at least two are required")
    spectra = [np.asarray(F, dtype=complex) for F in spectra]
    if band_tol is not None:
        sl = band_slice(spectra, band_tol)
        spectra = [F[sl] for F in spectra]
    n = len(spectra[0])
    if n == 0:
        return 0j
    off = n // 2
    m = np.arange(n) - off

    def last(total):
        # f_hat_l(-total) with zero outside the grid
        idx = -total + off
        ok = (idx >= 0) & (idx < n)
        return np.where(ok, spectra[-1][np.clip(idx, 0, n - 1)], 0.0)

    if l == 2:
        s = [m * dxi, np.zeros(n)]
        val = spectra[0] * last(m) * center_integral(s, z)
        return complex(val.sum() * dxi / (2 * np.pi))
    if l == 3:
        d1, d2 = m[:, None], m[None, :]
        s = [(d1 + d2) * dxi, np.broadcast_to(d2 * dxi, (n, n)), np.zeros((n, n))]
        val = spectra[0][:, None] * spectra[1][None, :] * last(d1 + d2) * center_integral(s, z)
        return complex(val.sum() * dxi**2 / (2 * np.pi) ** 1.5)
    if l == 4:
        d1, d2 = m[:, None, None], m[None, :, None]
        outer = spectra[0][:, None, None] * spectra[1][None, :, None]
        total = 0j
        # chunk the third index so the broadcast stays near CHUNK_ELEMENTS
        step = max(1, CHUNK_ELEMENTS // (n * n))
        for start in range(0, n, step):
            d3 = m[None, None, start:start + step]
            f3 = spectra[2][None, None, start:start + step]
            s = [(d1 + d2 + d3) * dxi, (d2 + d3) * dxi, d3 * dxi, np.zeros(1)]
            total += np.sum(outer * f3 * last(d1 + d2 + d3) * center_integral(s, z))
        return complex(total * dxi**3 / (2 * np.pi) ** 2)
    raise NotImplementedError("words longer than four are not supported")
