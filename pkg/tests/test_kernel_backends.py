"""Backend-equivalence and correctness tests for the series kernel.

Closed-form oracle: the recursion P_0 = 1, P_u = (1/u) sum_{v<u} h[u-1-v] P_v
has the generating function sum_u P_u x^u = exp(sum_n h_n x^{n+1}/(n+1)).
For h_n = A * w^{n+1} that is (1 - w x)^{-A}, so P_u = C(u+A-1, u) * w^u
exactly -- covering the geometric case (A=1), the rescaling regime (large A),
and the early-decay path (small w) with an independent log-domain reference.
"""

from __future__ import annotations

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.special import gammaln, logsumexp

from askopt import _series_py

try:
    from askopt import _series_cy
except ImportError:  # pragma: no cover - compiled extension optional
    _series_cy = None

BACKENDS = [_series_py] + ([_series_cy] if _series_cy is not None else [])
BACKEND_IDS = ["python"] + (["cython"] if _series_cy is not None else [])


def _log_reference(a: float, w: float, xi: int) -> float:
    """log of sum_{u<xi} C(u+a-1, u) w^u via logsumexp."""
    u = np.arange(xi, dtype=np.float64)
    log_p = gammaln(u + a) - gammaln(u + 1.0) - gammaln(a) + u * math.log(w)
    return float(logsumexp(log_p))


def _h_for(a: float, w: float, xi: int) -> np.ndarray:
    n = np.arange(1, xi, dtype=np.float64)
    return a * w**n


@pytest.mark.parametrize("impl", BACKENDS, ids=BACKEND_IDS)
@pytest.mark.parametrize("a,w,xi", [(1.0, 0.5, 400), (3.5, 0.8, 1500), (40.0, 0.95, 3000)])
def test_series_sum_matches_closed_form(impl, a, w, xi):
    s, off = impl.series_sum(_h_for(a, w, xi))
    assert s > 0.0
    got = math.log(s) + off
    want = _log_reference(a, w, xi)
    assert got == pytest.approx(want, rel=1e-11)


@pytest.mark.parametrize("impl", BACKENDS, ids=BACKEND_IDS)
def test_series_sum_rescales_through_overflow(impl):
    # P_u peaks far above 1e250: C(u+a-1, u) * w^u with a = 600, w = 0.999
    a, w, xi = 600.0, 0.999, 4000
    s, off = impl.series_sum(_h_for(a, w, xi))
    assert math.isfinite(s) and s > 0.0
    assert off > 0.0  # rescaling must have kicked in
    assert math.log(s) + off == pytest.approx(_log_reference(a, w, xi), rel=1e-10)


@pytest.mark.parametrize("impl", BACKENDS, ids=BACKEND_IDS)
def test_series_sum_early_decay_break_is_lossless(impl):
    a, w = 1.0, 0.2
    t0 = time.time()
    s, off = impl.series_sum(_h_for(a, w, 100_000))
    elapsed = time.time() - t0
    assert elapsed < 2.0  # the decay break must fire long before 1e5 terms
    assert math.log(s) + off == pytest.approx(_log_reference(a, w, 100_000), rel=1e-12)


@pytest.mark.parametrize("impl", BACKENDS, ids=BACKEND_IDS)
def test_series_overflow_error(impl):
    h = np.full(4, 1e300)
    with pytest.raises(impl.SeriesOverflowError):
        impl.series_sum(h)


@pytest.mark.skipif(_series_cy is None, reason="compiled backend unavailable")
def test_backends_agree_on_random_inputs():
    rng = np.random.default_rng(7)
    for size in (1, 2, 17, 300, 2000):
        h = rng.uniform(0.0, 1.2, size=size) * rng.uniform(0.0, 1.0) ** np.arange(1, size + 1)
        s_py, off_py = _series_py.series_sum(h)
        s_cy, off_cy = _series_cy.series_sum(h)
        assert math.log(s_py) + off_py == pytest.approx(math.log(s_cy) + off_cy, rel=1e-12, abs=1e-12)


@pytest.mark.skipif(_series_cy is None, reason="compiled backend unavailable")
def test_backends_agree_on_gradients():
    rng = np.random.default_rng(11)
    for size in (3, 50, 800):
        w = rng.uniform(0.3, 0.9)
        h = rng.uniform(0.2, 1.5, size=size) * w ** np.arange(1, size + 1)
        dh = rng.standard_normal((3, size)) * w ** np.arange(1, size + 1)
        s_py, ds_py, off_py = _series_py.series_sum_grad(h, dh)
        s_cy, ds_cy, off_cy = _series_cy.series_sum_grad(h, dh)
        assert math.log(s_py) + off_py == pytest.approx(math.log(s_cy) + off_cy, rel=1e-12)
        np.testing.assert_allclose(ds_py / s_py, ds_cy / s_cy, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("impl", BACKENDS, ids=BACKEND_IDS)
def test_series_sum_grad_matches_finite_difference(impl):
    rng = np.random.default_rng(3)
    size = 120
    w = 0.85
    h = rng.uniform(0.5, 1.5, size=size) * w ** np.arange(1, size + 1)
    direction = rng.standard_normal(size) * w ** np.arange(1, size + 1)
    s, ds, off = impl.series_sum_grad(h, direction[None, :])
    eps = 1e-7
    s_up, off_up = impl.series_sum(h + eps * direction)
    s_dn, off_dn = impl.series_sum(h - eps * direction)
    # d(ln S)/d(eps) compared in log space to stay scale-free
    fd = (math.log(s_up) + off_up - math.log(s_dn) - off_dn) / (2.0 * eps)
    assert ds[0] / s == pytest.approx(fd, rel=1e-6)


def test_env_var_forces_python_backend():
    code = "import askopt; print(askopt.series_backend)"
    env = dict(os.environ, ASKOPT_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "python"


@pytest.mark.skipif(_series_cy is None, reason="compiled backend unavailable")
def test_default_backend_is_compiled():
    env = dict(os.environ)
    env.pop("ASKOPT_PURE_PYTHON", None)
    code = "import askopt; print(askopt.series_backend)"
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "cython"
