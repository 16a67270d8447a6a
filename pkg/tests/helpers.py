"""Shared test utilities: channel builders, randomized instances, and
independent oracles (direct sampling of the pairwise decision statistic, and
a dense-covariance ML detector that never touches the eigenbasis path)."""

from __future__ import annotations

import numpy as np
from scipy import stats

from askopt.channel import (
    ChannelSpec,
    CorrelationKind,
    CorrelationModel,
    build_covariance,
    channel_eigen_structure,
    los_mean,
)
from askopt.modulation import (
    Constellation,
    Side,
    equispaced_constellation,
    snr_profile,
    snr_profile_from_gammas,
)

FAMILIES = (
    CorrelationKind.IID,
    CorrelationKind.UNIFORM,
    CorrelationKind.EXPONENTIAL,
)


def make_spec(
    kind: CorrelationKind | str = CorrelationKind.IID,
    n: int = 4,
    eps: float | None = None,
    k_av: float = 1.0,
    sigma_h_sq: float = 1.0,
    sigma_n_sq: float = 1.0,
    phases: np.ndarray | None = None,
) -> ChannelSpec:
    kind = CorrelationKind(kind)
    if kind is not CorrelationKind.IID and eps is None:
        eps = 0.5
    model = CorrelationModel(kind=kind, epsilon=eps)
    mean = los_mean(n, sigma_h_sq, k_av, phases=phases)
    return ChannelSpec(
        n=n, sigma_h_sq=sigma_h_sq, sigma_n_sq=sigma_n_sq, correlation=model, mean=mean
    )


def make_eig(
    kind: CorrelationKind | str = CorrelationKind.IID,
    n: int = 4,
    eps: float | None = None,
    k_av: float = 1.0,
    sigma_h_sq: float = 1.0,
    sigma_n_sq: float = 1.0,
    phases: np.ndarray | None = None,
):
    spec = make_spec(kind, n, eps, k_av, sigma_h_sq, sigma_n_sq, phases)
    return spec, channel_eigen_structure(spec)


def equispaced_profile(side: Side, m: int, gamma_av: float):
    """Per-level SNR profile of the equispaced constellation at sigma ratios 1."""
    con = equispaced_constellation(side, m, e_av=gamma_av)
    return snr_profile(con, 1.0, 1.0)


def random_instance(
    rng: np.random.Generator, max_n: int = 8, m_choices=(4,), gamma_exp_range=(0.0, 2.5)
):
    """Randomized (spec, eig, snr) triple spanning families, sides and SNRs."""
    kind = FAMILIES[rng.integers(0, len(FAMILIES))]
    n = int(rng.integers(2, max_n + 1))
    eps = float(rng.uniform(0.15, 0.75)) if kind is not CorrelationKind.IID else None
    k_av = float(rng.uniform(0.0, 2.5))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n)
    spec, eig = make_eig(kind, n=n, eps=eps, k_av=k_av, phases=phases)
    side = Side.ONE_SIDED if rng.uniform() < 0.5 else Side.TWO_SIDED
    m = int(m_choices[rng.integers(0, len(m_choices))])
    gamma_av = float(10.0 ** (rng.uniform(*gamma_exp_range)))
    base = equispaced_profile(side, m, gamma_av).gammas
    jitter = np.exp(0.3 * rng.standard_normal(base.size))
    gammas = np.sort(base * jitter)
    # keep the profile strictly increasing with healthy gaps
    for k in range(1, gammas.size):
        gap = 1e-2 * gamma_av
        if gammas[k] - gammas[k - 1] < gap:
            gammas[k] = gammas[k - 1] + gap
    return spec, eig, snr_profile_from_gammas(side, gammas)


def sample_statistic(terms, draws: int, rng: np.random.Generator) -> np.ndarray:
    """Direct draws of the pairwise decision statistic X = sum_p beta_p * Y_p,
    where Y_p is half a noncentral chi-square with 2*q_p degrees of freedom
    and noncentrality 2*gamma_p*kappa_p (the law encoded by the m.g.f.)."""
    total = np.zeros(draws)
    for b, g, kap, q in zip(terms.beta, terms.gamma, terms.k_sums, terms.q):
        df = 2.0 * float(q)
        nc = 2.0 * float(g) * float(kap)
        if nc > 0.0:
            y = stats.ncx2.rvs(df, nc, size=draws, random_state=rng)
        else:
            y = stats.chi2.rvs(df, size=draws, random_state=rng)
        total += float(b) * 0.5 * y
    return total


def sample_statistic_fast(terms, draws: int, rng: np.random.Generator) -> np.ndarray:
    """Same law as sample_statistic, built from raw normal draws: each group
    contributes beta/2 times a sum of 2q squared unit normals, one of them
    offset by sqrt(2*gamma*kappa).  Fast enough for 1e7-draw comparisons."""
    total = np.zeros(draws)
    for b, g, kap, q in zip(terms.beta, terms.gamma, terms.k_sums, terms.q):
        nc = 2.0 * float(g) * float(kap)
        y = (rng.standard_normal(draws) + np.sqrt(nc)) ** 2
        for _ in range(2 * int(q) - 1):
            y += rng.standard_normal(draws) ** 2
        total += float(b) * 0.5 * y
    return total


def fd_pep_central(i, j, t, snr, eig, xi: int, h: float) -> float:
    """Central difference of pep in the SNR of symbol t's level."""
    from askopt.sep import pep

    lv = int(snr.levels_of_symbols[t])
    up = snr.gammas.copy()
    up[lv] += h
    dn = snr.gammas.copy()
    dn[lv] -= h
    f_up = pep(i, j, snr_profile_from_gammas(snr.side, up), eig, xi)
    f_dn = pep(i, j, snr_profile_from_gammas(snr.side, dn), eig, xi)
    return (f_up - f_dn) / (2.0 * h)


def fd_pep_richardson(i, j, t, snr, eig, xi: int, h_rel: float = 5e-4) -> float:
    """Richardson-extrapolated central difference, step capped by the gaps so
    the bumped profiles stay strictly ordered."""
    lv = int(snr.levels_of_symbols[t])
    gam = snr.gammas
    gap_lo = gam[lv] if lv == 0 else gam[lv] - gam[lv - 1]
    gap_hi = np.inf if lv == gam.size - 1 else gam[lv + 1] - gam[lv]
    h = min(h_rel * gam[lv], 0.2 * min(gap_lo, gap_hi))
    return (
        4.0 * fd_pep_central(i, j, t, snr, eig, xi, h)
        - fd_pep_central(i, j, t, snr, eig, xi, 2.0 * h)
    ) / 3.0


def dense_detect(received: np.ndarray, spec: ChannelSpec, con: Constellation) -> np.ndarray:
    """Oracle ML decisions from the unrotated N-dimensional Gaussian densities.

    For each symbol s the receive vector is CN(s*mu, s^2*K_h + sigma_n^2*I);
    the metric is ln det C_s + (r - s*mu)^H C_s^{-1} (r - s*mu), evaluated with
    dense solves so the eigenbasis shortcut in the package is never used.
    """
    received = np.atleast_2d(received)
    k_h = build_covariance(spec.correlation, spec.n, spec.sigma_h_sq)
    eye = np.eye(spec.n)
    metrics = np.empty((received.shape[0], con.m))
    for m_idx, s in enumerate(con.symbols):
        cov = s**2 * k_h + spec.sigma_n_sq * eye
        sign, logdet = np.linalg.slogdet(cov)
        assert sign.real > 0
        diff = received - s * spec.mean[None, :]
        solved = np.linalg.solve(cov, diff.T).T
        quad = np.einsum("bn,bn->b", diff.conj(), solved).real
        metrics[:, m_idx] = quad + logdet.real
    return np.argmin(metrics, axis=1)
