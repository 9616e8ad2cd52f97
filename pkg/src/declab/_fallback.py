"""Pure NumPy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable or when
``DECLAB_PURE_PYTHON=1`` is set.  Signatures match ``_kernels.pyx``.
"""

import numpy as np

# cap on the (times x factors) work array in coherence_product
_CHUNK_ELEMS = 1 << 21


def coherence_product(p, q, g, s):
    """prod_k (p_k exp(-i g_k s) + q_k exp(+i g_k s)) for every s, ascending k."""
    p = np.ascontiguousarray(p, dtype=float)
    q = np.ascontiguousarray(q, dtype=float)
    g = np.ascontiguousarray(g, dtype=float)
    s = np.ascontiguousarray(s, dtype=float)
    out = np.ones(len(s), dtype=complex)
    if len(g) == 0:
        return out
    rows = max(1, _CHUNK_ELEMS // len(g))
    for lo in range(0, len(s), rows):
        phase = np.outer(s[lo:lo + rows], g)
        c, sn = np.cos(phase), np.sin(phase)
        fac = (p + q) * c + 1j * (q - p) * sn
        # np.multiply.reduce runs left to right along the last axis
        out[lo:lo + rows] = np.multiply.reduce(fac, axis=1)
    return out


def log_coherence_abs(p, q, g, s):
    """sum_k 1/2 ln |p_k exp(-i g_k s) + q_k exp(i g_k s)|^2; -inf when a factor vanishes."""
    p = np.ascontiguousarray(p, dtype=float)
    q = np.ascontiguousarray(q, dtype=float)
    g = np.ascontiguousarray(g, dtype=float)
    s = np.ascontiguousarray(s, dtype=float)
    out = np.zeros(len(s))
    if len(g) == 0:
        return out
    tot = p + q
    pq4 = 4.0 * p * q / (tot * tot)
    ln_tot = np.log(tot)
    rows = max(1, _CHUNK_ELEMS // len(g))
    with np.errstate(divide="ignore", invalid="ignore"):
        for lo in range(0, len(s), rows):
            sn = np.sin(np.outer(s[lo:lo + rows], g))
            x = -pq4 * sn * sn
            terms = ln_tot + 0.5 * np.log1p(x)
            terms = np.where(x <= -1.0, -np.inf, terms)
            out[lo:lo + rows] = terms.sum(axis=1)
    return out


def propagate_linear2(steps, y0):
    """Apply 2x2 real step matrices in sequence: y[n+1] = steps[n] @ y[n]."""
    steps = np.ascontiguousarray(steps, dtype=float)
    n = steps.shape[0]
    out = np.empty((n + 1, 2), dtype=complex)
    u, v = complex(y0[0]), complex(y0[1])
    out[0, 0], out[0, 1] = u, v
    for i in range(n):
        m = steps[i]
        u, v = m[0, 0] * u + m[0, 1] * v, m[1, 0] * u + m[1, 1] * v
        out[i + 1, 0] = u
        out[i + 1, 1] = v
    return out
