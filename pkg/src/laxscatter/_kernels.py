"""Backend selection for hot loops.

The compiled kernel is used when it was built and LAXSCATTER_PURE_PYTHON is
not set; otherwise the numpy fallback is used.

The march is the Cox-Matthews exponential RK4 scheme for
phi' = D phi + U(x) phi with D diagonal: the D part is integrated exactly,
so the step error does not grow with the stiffness k|omega_i - omega_j|.
"""

import os

import numpy as np

from . import _march_py

CONTOUR_POINTS = 64

try:
    from . import _march as _compiled
except ImportError:
    _compiled = None

KERNELS = {"python": _march_py.march_etd4}
if _compiled is not None:
    KERNELS["cython"] = _compiled.march_etd4
BACKEND = "cython" if "cython" in KERNELS and not os.environ.get("LAXSCATTER_PURE_PYTHON") else "python"


def _contour_mean(z: np.ndarray, f) -> np.ndarray:
    # entire functions with removable singularities at 0, averaged over a unit circle around z
    r = np.exp(2j * np.pi * (np.arange(CONTOUR_POINTS) + 0.5) / CONTOUR_POINTS)
    return np.mean(f(z[:, None] + r[None, :]), axis=1)


def etd_coefficients(d, h: float) -> np.ndarray:
    """Rows (E, E2, Q, f1, f2, f3) for the diagonal d and step h."""
    z = np.asarray(d, dtype=complex) * h
    E = np.exp(z)
    E2 = np.exp(z / 2)
    Q = h / 2 * _contour_mean(z / 2, lambda w: (np.exp(w) - 1) / w)
    f1 = h * _contour_mean(z, lambda w: (-4 - w + np.exp(w) * (4 - 3 * w + w * w)) / w**3)
    f2 = h * _contour_mean(z, lambda w: (2 + w + np.exp(w) * (w - 2)) / w**3)
    f3 = h * _contour_mean(z, lambda w: (-4 - 3 * w - w * w + np.exp(w) * (4 - w)) / w**3)
    return np.array([E, E2, Q, f1, f2, f3])


def march(U_nodes, U_mid, d, h: float, p0, backend: str | None = None) -> np.ndarray:
    """States at every node from node 0 to the last node of ``U_nodes``.

    ``U_mid`` holds U at the midpoints between consecutive nodes; ``h`` may
    be negative for a right-to-left march over reversed arrays.
    """
    coef = etd_coefficients(d, h)
    U_nodes = np.ascontiguousarray(U_nodes, dtype=complex)
    U_mid = np.ascontiguousarray(U_mid, dtype=complex)
    p0 = np.ascontiguousarray(p0, dtype=complex)
    backend = BACKEND if backend is None else backend
    if backend not in KERNELS:
        raise RuntimeError(f"backend {backend!r} is not available")
    return KERNELS[backend](U_nodes, U_mid, coef, p0)
