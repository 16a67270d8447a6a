"""Backend benchmark: compiled vs pure-Python series kernel.

Run as `python -m askopt.benchmark`.  Times the series recursion on
coefficients taken from a representative pairwise decision statistic at
several depths, for both kernel backends, then times a full union-bound
evaluation with whichever backend is active in this process.
"""

from __future__ import annotations

import time

import numpy as np

import askopt._series_py as series_py
from askopt import (
    ChannelSpec,
    CorrelationKind,
    CorrelationModel,
    Side,
    channel_eigen_structure,
    equispaced_constellation,
    los_mean,
    pep_terms,
    series_backend,
    snr_profile_from_gammas,
    union_bound,
)
from askopt.sep import _series_inputs

try:
    import askopt._series_cy as series_cy
except ImportError:  # pragma: no cover - depends on the build
    series_cy = None


def _demo_setup():
    n = 8
    spec = ChannelSpec(
        n=n,
        sigma_h_sq=1.0,
        sigma_n_sq=1.0,
        correlation=CorrelationModel(kind=CorrelationKind.EXPONENTIAL, epsilon=0.5),
        mean=los_mean(n, 1.0, 1.0),
    )
    eig = channel_eigen_structure(spec)
    gamma_av = 10.0 ** (20.0 / 10.0)
    eq = equispaced_constellation(Side.ONE_SIDED, 4, e_av=gamma_av)
    snr = snr_profile_from_gammas(Side.ONE_SIDED, np.unique(eq.symbols**2))
    return eig, snr


def _time(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    eig, snr = _demo_setup()
    terms = pep_terms(3, 0, snr, eig)
    backends = [("python", series_py)]
    if series_cy is not None:
        backends.append(("cython", series_cy))
    print(f"active backend in this process: {series_backend}")
    print(f"{'depth':>8} {'backend':>8} {'series_sum':>12} {'with grad':>12}")
    for xi in (500, 2000, 8000):
        _, _, _, _, _, h = _series_inputs(terms, terms.alpha, xi)
        dh = np.vstack([h * 0.01, -h * 0.02])
        for name, mod in backends:
            t_sum = _time(lambda m=mod: m.series_sum(h), repeats=5)
            t_grad = _time(lambda m=mod: m.series_sum_grad(h, dh), repeats=5)
            print(f"{xi:>8} {name:>8} {t_sum * 1e3:>9.3f} ms {t_grad * 1e3:>9.3f} ms")
    t_bound = _time(
        lambda: union_bound(snr, eig, 2000, adaptive=False), repeats=3
    )
    print(f"union_bound (M=4, N=8, xi=2000, {series_backend}): {t_bound * 1e3:.1f} ms")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
