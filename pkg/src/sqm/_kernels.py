"""Low-level filtering kernels.

The per-channel biquad cascades dominate runtime (hundreds of channels,
4-8 sections each), so they are JIT-compiled with numba when available.
A scipy fallback keeps everything functional without it.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import sosfilt

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


def _cascade_py(x, sos, out):
    for k in range(sos.shape[0]):
        out[k] = sosfilt(sos[k], x)


if HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def _cascade_nb(x, sos, out):  # pragma: no cover - exercised via wrapper
        n_ch = sos.shape[0]
        n_sec = sos.shape[1]
        n = x.shape[0]
        for k in prange(n_ch):
            for s in range(n_sec):
                b0 = sos[k, s, 0]
                b1 = sos[k, s, 1]
                b2 = sos[k, s, 2]
                a1 = sos[k, s, 4]
                a2 = sos[k, s, 5]
                z1 = 0.0
                z2 = 0.0
                if s == 0:
                    for t in range(n):
                        v = x[t]
                        y = b0 * v + z1
                        z1 = b1 * v - a1 * y + z2
                        z2 = b2 * v - a2 * y
                        out[k, t] = y
                else:
                    for t in range(n):
                        v = out[k, t]
                        y = b0 * v + z1
                        z1 = b1 * v - a1 * y + z2
                        z2 = b2 * v - a2 * y
                        out[k, t] = y


def filter_cascade_bank(x: np.ndarray, sos: np.ndarray) -> np.ndarray:
    """Run one input signal through a bank of per-channel biquad cascades.

    Parameters
    ----------
    x : (n,) float64 input samples.
    sos : (n_channels, n_sections, 6) second-order sections, a0 == 1.

    Returns
    -------
    (n_channels, n) float64 filtered outputs.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    sos = np.ascontiguousarray(sos, dtype=np.float64)
    out = np.empty((sos.shape[0], x.shape[0]), dtype=np.float64)
    if HAVE_NUMBA:
        _cascade_nb(x, sos, out)
    else:
        _cascade_py(x, sos, out)
    return out
