"""Pure-numpy backend for the truncated exponential-series kernel.

Evaluates S = sum_{u=0}^{xi-1} P_u where P_0 = 1 and

    P_u = (1/u) * sum_{v=0}^{u-1} h[u-1-v] * P_v,

optionally together with directional derivatives dS obtained by carrying
dP_u = (1/u) * sum_{v<u} (dh[u-1-v]*P_v + h[u-1-v]*dP_v) through the same
recursion.  All h entries are nonnegative on the valid domain, so every P_u
is nonnegative and the sum has no cancellation; overflow is handled by
rescaling the partial arrays and accumulating a log offset.  Results are
returned as (mantissa, log_offset) pairs: true value = mantissa * exp(offset).
"""

from __future__ import annotations

import math

import numpy as np

backend_name = "python"

_RESCALE_HI = 1e250
_RESCALE_LO = 1e-250
_LOG_HI = math.log(1e250)
_DECAY_REL = 1e-18
_DECAY_RUN = 32
_DECAY_MIN_U = 64


class SeriesOverflowError(ArithmeticError):
    """Raised when rescaling cannot keep the series recursion finite."""


def series_sum(h: np.ndarray) -> tuple[float, float]:
    """Return (S_mantissa, log_offset) for the truncated series driven by h.

    h has length xi-1; entry n holds the weight multiplying P_v at lag
    n = u-1-v in the recursion for P_u.
    """
    h = np.ascontiguousarray(h, dtype=np.float64)
    xi = h.shape[0] + 1
    p = np.empty(xi)
    p[0] = 1.0
    s = 1.0
    off = 0.0
    decay_run = 0
    for u in range(1, xi):
        pu = float(np.dot(h[u - 1 :: -1], p[:u])) / u
        p[u] = pu
        s += pu
        if pu > _RESCALE_HI or s > _RESCALE_HI:
            p[: u + 1] *= _RESCALE_LO
            s *= _RESCALE_LO
            off += _LOG_HI
            if not math.isfinite(s):
                raise SeriesOverflowError("series rescaling failed to stay finite")
        if pu <= s * _DECAY_REL:
            decay_run += 1
            if decay_run >= _DECAY_RUN and u >= _DECAY_MIN_U:
                break
        else:
            decay_run = 0
    if not math.isfinite(s):
        raise SeriesOverflowError("series sum is not finite")
    return s, off


def series_sum_grad(h: np.ndarray, dh: np.ndarray) -> tuple[float, np.ndarray, float]:
    """Return (S_mantissa, dS_mantissas, log_offset); dh has shape (k, xi-1).

    dS[a] carries d(S)/d(theta_a) for the parameter with direction dh[a].
    """
    h = np.ascontiguousarray(h, dtype=np.float64)
    dh = np.ascontiguousarray(dh, dtype=np.float64)
    if dh.ndim != 2 or dh.shape[1] != h.shape[0]:
        raise ValueError("dh must have shape (k, len(h))")
    k = dh.shape[0]
    xi = h.shape[0] + 1
    p = np.empty(xi)
    dp = np.empty((k, xi))
    p[0] = 1.0
    dp[:, 0] = 0.0
    s = 1.0
    ds = np.zeros(k)
    off = 0.0
    decay_run = 0
    for u in range(1, xi):
        window = h[u - 1 :: -1]
        pu = float(np.dot(window, p[:u])) / u
        dpu = (dh[:, u - 1 :: -1] @ p[:u] + dp[:, :u] @ window) / u
        p[u] = pu
        dp[:, u] = dpu
        s += pu
        ds += dpu
        limit = max(pu, s, float(np.max(np.abs(dpu))) if k else 0.0,
                    float(np.max(np.abs(ds))) if k else 0.0)
        if limit > _RESCALE_HI:
            p[: u + 1] *= _RESCALE_LO
            dp[:, : u + 1] *= _RESCALE_LO
            s *= _RESCALE_LO
            ds *= _RESCALE_LO
            off += _LOG_HI
            if not math.isfinite(s):
                raise SeriesOverflowError("series rescaling failed to stay finite")
        if pu <= s * _DECAY_REL:
            decay_run += 1
            if decay_run >= _DECAY_RUN and u >= _DECAY_MIN_U:
                break
        else:
            decay_run = 0
    if not (math.isfinite(s) and bool(np.all(np.isfinite(ds)))):
        raise SeriesOverflowError("series sum is not finite")
    return s, ds, off
