"""Pure numpy exponential RK4 march, used when the compiled kernel is unavailable."""

import numpy as np


def march_etd4(U_nodes, U_mid, coef, p0):
    """March phi' = D phi + U(x) phi from node 0 to node m-1 of the given arrays.

    ``coef`` holds the six diagonal coefficient vectors (E, E2, Q, f1, f2, f3)
    from :func:`laxscatter._kernels.etd_coefficients`.  Returns an (m, n)
    array of states, with row 0 equal to ``p0``.
    """
    U_nodes = np.asarray(U_nodes, dtype=complex)
    U_mid = np.asarray(U_mid, dtype=complex)
    E, E2, Q, f1, f2, f3 = np.asarray(coef, dtype=complex)
    m, n = U_nodes.shape[:2]
    out = np.empty((m, n), dtype=complex)
    p = np.array(p0, dtype=complex)
    out[0] = p
    for s in range(m - 1):
        Na = U_nodes[s] @ p
        a = E2 * p + Q * Na
        Nb = U_mid[s] @ a
        b = E2 * p + Q * Nb
        Nc = U_mid[s] @ b
        c = E2 * a + Q * (2.0 * Nc - Na)
        Nd = U_nodes[s + 1] @ c
        p = E * p + f1 * Na + 2.0 * f2 * (Nb + Nc) + f3 * Nd
        out[s + 1] = p
    return out
