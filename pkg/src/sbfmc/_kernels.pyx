# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: exponential integral E1 and exhaustive nearest-
candidate detection.  Signatures match sbfmc._kernels_py."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log

cnp.import_array()

BACKEND = "cython"

cdef double _EULER_GAMMA = 0.57721566490153286061
cdef double _TINY = 1e-300


cdef double _e1_series(double x) nogil:
    cdef double total = -_EULER_GAMMA - log(x)
    cdef double term = 1.0
    cdef double delta, bound
    cdef int k
    for k in range(1, 60):
        term *= -x / k
        delta = -term / k
        total += delta
        bound = fabs(total)
        if bound < 1e-30:
            bound = 1e-30
        if fabs(delta) < 1e-18 * bound:
            break
    return total


cdef double _e1_cf_scaled(double x) nogil:
    cdef double b = x + 1.0
    cdef double c = 1.0 / _TINY
    cdef double d = 1.0 / b
    cdef double h = d
    cdef double a, delta
    cdef int i
    for i in range(1, 300):
        a = -1.0 * i * i
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if fabs(delta - 1.0) < 1e-16:
            break
    return h


cdef double _e1(double x) nogil:
    if x <= 1.0:
        return _e1_series(x)
    return _e1_cf_scaled(x) * exp(-x)


cdef double _e1_scaled(double x) nogil:
    if x <= 1.0:
        return exp(x) * _e1_series(x)
    return _e1_cf_scaled(x)


def e1(double x):
    """Exponential integral E1(x) for scalar x > 0."""
    return _e1(x)


def e1_scaled(double x):
    """exp(x)*E1(x) for scalar x > 0, safe against overflow for any x."""
    return _e1_scaled(x)


def e1_array(x):
    """Vectorized E1 over a 1-D float array with entries > 0."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(xv.shape[0], dtype=np.float64)
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        out[i] = _e1(xv[i])
    return out


def e1_scaled_array(x):
    """Vectorized exp(x)*E1(x) over a 1-D float array with entries > 0."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(xv.shape[0], dtype=np.float64)
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        out[i] = _e1_scaled(xv[i])
    return out


def min_dist_detect(y, cand, chunk=None):
    """Index of the closest candidate row for every observation row.

    Parameters
    ----------
    y : (B, L) complex array of observations.
    cand : (K, L) complex array of noiseless candidates.

    Returns
    -------
    (B,) int64 array with argmin_k sum_j |y[b, j] - cand[k, j]|^2.
    """
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] yv = np.ascontiguousarray(y, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] cv = np.ascontiguousarray(cand, dtype=np.complex128)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(yv.shape[0], dtype=np.int64)
    cdef Py_ssize_t B = yv.shape[0]
    cdef Py_ssize_t L = yv.shape[1]
    cdef Py_ssize_t K = cv.shape[0]
    cdef Py_ssize_t b, k, l
    cdef double best, metric, dre, dim
    cdef Py_ssize_t best_k
    with nogil:
        for b in range(B):
            best = -1.0
            best_k = 0
            for k in range(K):
                metric = 0.0
                for l in range(L):
                    dre = yv[b, l].real - cv[k, l].real
                    dim = yv[b, l].imag - cv[k, l].imag
                    metric += dre * dre + dim * dim
                if best < 0.0 or metric < best:
                    best = metric
                    best_k = k
            out[b] = best_k
    return out
