# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Cython backend for the truncated exponential-series kernel.

Same contract as askopt._series_py: series_sum / series_sum_grad return
(mantissa, [gradient mantissas,] log_offset) with value = mantissa*exp(offset).
"""

from libc.math cimport isfinite, log

import numpy as np

backend_name = "cython"

cdef double _RESCALE_HI = 1e250
cdef double _RESCALE_LO = 1e-250
cdef double _LOG_HI = log(1e250)
cdef double _DECAY_REL = 1e-18
cdef int _DECAY_RUN = 32
cdef int _DECAY_MIN_U = 64


class SeriesOverflowError(ArithmeticError):
    """Raised when rescaling cannot keep the series recursion finite."""


def series_sum(h):
    """Return (S_mantissa, log_offset) for the truncated series driven by h."""
    cdef double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef Py_ssize_t n = hv.shape[0]
    cdef Py_ssize_t xi = n + 1
    p_arr = np.empty(xi)
    cdef double[::1] p = p_arr
    cdef double s = 1.0
    cdef double off = 0.0
    cdef double acc, pu
    cdef Py_ssize_t u, v
    cdef int decay_run = 0
    p[0] = 1.0
    for u in range(1, xi):
        acc = 0.0
        for v in range(u):
            acc += hv[u - 1 - v] * p[v]
        pu = acc / u
        p[u] = pu
        s += pu
        if pu > _RESCALE_HI or s > _RESCALE_HI:
            for v in range(u + 1):
                p[v] *= _RESCALE_LO
            s *= _RESCALE_LO
            off += _LOG_HI
            if not isfinite(s):
                raise SeriesOverflowError("series rescaling failed to stay finite")
        if pu <= s * _DECAY_REL:
            decay_run += 1
            if decay_run >= _DECAY_RUN and u >= _DECAY_MIN_U:
                break
        else:
            decay_run = 0
    if not isfinite(s):
        raise SeriesOverflowError("series sum is not finite")
    return s, off


def series_sum_grad(h, dh):
    """Return (S_mantissa, dS_mantissas, log_offset); dh has shape (k, len(h))."""
    cdef double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    dh_arr = np.ascontiguousarray(dh, dtype=np.float64)
    if dh_arr.ndim != 2 or dh_arr.shape[1] != hv.shape[0]:
        raise ValueError("dh must have shape (k, len(h))")
    cdef double[:, ::1] dhv = dh_arr
    cdef Py_ssize_t k = dhv.shape[0]
    cdef Py_ssize_t n = hv.shape[0]
    cdef Py_ssize_t xi = n + 1
    p_arr = np.empty(xi)
    dp_arr = np.empty((k, xi))
    ds_arr = np.zeros(k)
    cdef double[::1] p = p_arr
    cdef double[:, ::1] dp = dp_arr
    cdef double[::1] ds = ds_arr
    cdef double s = 1.0
    cdef double off = 0.0
    cdef double acc, pu, hval, limit, mag
    cdef double daccs[8]
    cdef Py_ssize_t u, v, a, lag
    cdef int decay_run = 0
    if k > 8:
        raise ValueError("at most 8 gradient directions supported")
    p[0] = 1.0
    for a in range(k):
        dp[a, 0] = 0.0
    for u in range(1, xi):
        acc = 0.0
        for a in range(k):
            daccs[a] = 0.0
        for v in range(u):
            lag = u - 1 - v
            hval = hv[lag]
            acc += hval * p[v]
            for a in range(k):
                daccs[a] += dhv[a, lag] * p[v] + hval * dp[a, v]
        pu = acc / u
        p[u] = pu
        s += pu
        limit = pu if pu > s else s
        for a in range(k):
            dp[a, u] = daccs[a] / u
            ds[a] += dp[a, u]
            mag = dp[a, u] if dp[a, u] >= 0 else -dp[a, u]
            if mag > limit:
                limit = mag
            mag = ds[a] if ds[a] >= 0 else -ds[a]
            if mag > limit:
                limit = mag
        if limit > _RESCALE_HI:
            for v in range(u + 1):
                p[v] *= _RESCALE_LO
            for a in range(k):
                for v in range(u + 1):
                    dp[a, v] *= _RESCALE_LO
                ds[a] *= _RESCALE_LO
            s *= _RESCALE_LO
            off += _LOG_HI
            if not isfinite(s):
                raise SeriesOverflowError("series rescaling failed to stay finite")
        if pu <= s * _DECAY_REL:
            decay_run += 1
            if decay_run >= _DECAY_RUN and u >= _DECAY_MIN_U:
                break
        else:
            decay_run = 0
    if not isfinite(s):
        raise SeriesOverflowError("series sum is not finite")
    for a in range(k):
        if not isfinite(ds[a]):
            raise SeriesOverflowError("series gradient is not finite")
    return s, ds_arr, off
