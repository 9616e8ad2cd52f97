# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; same contracts as declab._fallback."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, log, log1p, INFINITY

cnp.import_array()


def coherence_product(p, q, g, s):
    cdef const double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef const double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef const double[::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef Py_ssize_t nk = gv.shape[0], ns = sv.shape[0], i, k
    out = np.empty(ns, dtype=np.complex128)
    cdef double complex[::1] ov = out
    cdef double re, im, fr, fi, c, sn, ph, tmp
    with nogil:
        for i in range(ns):
            re = 1.0
            im = 0.0
            for k in range(nk):
                ph = gv[k] * sv[i]
                c = cos(ph)
                sn = sin(ph)
                fr = (pv[k] + qv[k]) * c
                fi = (qv[k] - pv[k]) * sn
                tmp = re * fr - im * fi
                im = re * fi + im * fr
                re = tmp
            ov[i] = re + 1j * im
    return out


def log_coherence_abs(p, q, g, s):
    cdef const double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef const double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef const double[::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef Py_ssize_t nk = gv.shape[0], ns = sv.shape[0], i, k
    out = np.empty(ns, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double acc, tot, x, sn
    with nogil:
        for i in range(ns):
            acc = 0.0
            for k in range(nk):
                tot = pv[k] + qv[k]
                sn = sin(gv[k] * sv[i])
                x = -4.0 * pv[k] * qv[k] * sn * sn / (tot * tot)
                if x <= -1.0:
                    acc = -INFINITY
                    break
                acc += log(tot) + 0.5 * log1p(x)
            ov[i] = acc
    return out


def propagate_linear2(steps, y0):
    cdef const double[:, :, ::1] m = np.ascontiguousarray(steps, dtype=np.float64)
    cdef Py_ssize_t n = m.shape[0], i
    out = np.empty((n + 1, 2), dtype=np.complex128)
    cdef double complex[:, ::1] ov = out
    cdef double complex u = y0[0], v = y0[1], un
    ov[0, 0] = u
    ov[0, 1] = v
    with nogil:
        for i in range(n):
            un = m[i, 0, 0] * u + m[i, 0, 1] * v
            v = m[i, 1, 0] * u + m[i, 1, 1] * v
            u = un
            ov[i + 1, 0] = u
            ov[i + 1, 1] = v
    return out
