"""Optimal noncoherent ML detection and Monte-Carlo SEP estimation.

The receive vector is rotated into the covariance eigenbasis, where the
conditional distribution given symbol s_m is a product of independent complex
Gaussians with means s_m*mu_tilde_l and variances s_m^2*sigma_h^2*lambda_l +
sigma_n^2.  The ML metric is the negative log-density up to constants:

    metric_m = sum_l |r_tilde_l - s_m*mu_tilde_l|^2 / den_{m,l} + sum_l ln den_{m,l}

and the detector returns the lowest metric index (ties break to the lowest).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from askopt.channel import ChannelSpec, EigenStructure, _block_rng, channel_eigen_structure
from askopt.modulation import Constellation

__all__ = [
    "DetectorContext",
    "SimEstimate",
    "detector_context",
    "rotate",
    "detect",
    "simulate_sep",
]

_SIM_BLOCK = 1 << 14


@dataclass(frozen=True)
class DetectorContext:
    """Precomputed per-symbol quantities for the rotated-domain ML metric."""

    eig: EigenStructure
    constellation: Constellation
    sigma_h_sq: float
    sigma_n_sq: float
    mu_tilde: np.ndarray
    denoms: np.ndarray  # (M, N): s_m^2*sigma_h^2*lambda_l + sigma_n^2
    log_dets: np.ndarray  # (M,): sum_l ln denoms

    @property
    def m(self) -> int:
        return self.constellation.m

    @property
    def n(self) -> int:
        return self.eig.n


def detector_context(
    constellation: Constellation,
    spec: ChannelSpec,
    eig: EigenStructure | None = None,
    group_tol: float = 1e-9,
) -> DetectorContext:
    """Bind a constellation to a channel, precomputing the metric tables."""
    if eig is None:
        eig = channel_eigen_structure(spec, group_tol=group_tol)
    lam_full = eig.lambdas_full
    s = constellation.symbols
    denoms = s[:, None] ** 2 * spec.sigma_h_sq * lam_full[None, :] + spec.sigma_n_sq
    log_dets = np.sum(np.log(denoms), axis=1)
    return DetectorContext(
        eig=eig,
        constellation=constellation,
        sigma_h_sq=spec.sigma_h_sq,
        sigma_n_sq=spec.sigma_n_sq,
        mu_tilde=eig.mu_tilde,
        denoms=denoms,
        log_dets=log_dets,
    )


def rotate(received: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Rotate receive vectors into the eigenbasis: r_tilde = U^H r.

    Accepts a single length-N vector or a (batch, N) array.
    """
    received = np.asarray(received)
    return received @ u.conj()


def _metrics(r_tilde: np.ndarray, ctx: DetectorContext) -> np.ndarray:
    """ML metrics, shape (batch, M), for rotated inputs of shape (batch, N)."""
    diff = r_tilde[:, None, :] - ctx.constellation.symbols[None, :, None] * ctx.mu_tilde[None, None, :]
    quad = np.sum((diff.real**2 + diff.imag**2) / ctx.denoms[None, :, :], axis=2)
    return quad + ctx.log_dets[None, :]


def detect(r_tilde: np.ndarray, ctx: DetectorContext) -> int:
    """Most likely symbol index for one rotated receive vector (ties: lowest)."""
    r_tilde = np.asarray(r_tilde)
    if r_tilde.ndim != 1:
        raise ValueError("detect expects a single length-N rotated vector")
    return int(np.argmin(_metrics(r_tilde[None, :], ctx)[0]))


def detect_batch(r_tilde: np.ndarray, ctx: DetectorContext) -> np.ndarray:
    """Vectorized detect over a (batch, N) array of rotated receive vectors."""
    return np.argmin(_metrics(np.asarray(r_tilde), ctx), axis=1)


def _cn01(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Unit-variance circular complex Gaussians from an existing stream."""
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


@dataclass(frozen=True)
class SimEstimate:
    """Monte-Carlo SEP estimate with its binomial standard error."""

    sep_hat: float
    stderr: float
    trials: int
    errors: int
    seed: int


def _simulate_block(ctx: DetectorContext, mean: np.ndarray, seed: int, block: int, count: int) -> int:
    """Error count over one deterministic block of trials.

    Each block draws from its own counter-based stream keyed by (seed, block)
    in a fixed order -- symbol indices, then channel variates, then noise --
    so the total is independent of scheduling and block partitioning.
    """
    rng = _block_rng(seed, block)
    n = ctx.n
    sym = rng.integers(0, ctx.m, size=count)
    w = _cn01(rng, (count, n))
    noise = _cn01(rng, (count, n)) * math.sqrt(ctx.sigma_n_sq)
    scale = math.sqrt(ctx.sigma_h_sq) * np.sqrt(ctx.eig.lambdas_full)
    h = mean[None, :] + (w * scale[None, :]) @ ctx.eig.u.T
    r = ctx.constellation.symbols[sym, None] * h + noise
    decided = detect_batch(rotate(r, ctx.eig.u), ctx)
    return int(np.count_nonzero(decided != sym))


def simulate_sep(ctx: DetectorContext, trials: int, seed: int, workers: int = 1) -> SimEstimate:
    """Monte-Carlo SEP over `trials` uniformly drawn symbols.

    Deterministic for a given (ctx, trials, seed) regardless of `workers`:
    trials are split into fixed-size blocks with independent counter-based
    streams, and integer error counts are summed.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if seed < 0:
        raise ValueError("seed must be >= 0")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    mean = ctx.eig.u @ ctx.mu_tilde
    blocks = []
    start = 0
    idx = 0
    while start < trials:
        count = min(_SIM_BLOCK, trials - start)
        blocks.append((idx, count))
        start += count
        idx += 1

    def run(args: tuple[int, int]) -> int:
        block, count = args
        return _simulate_block(ctx, mean, seed, block, count)

    if workers == 1 or len(blocks) == 1:
        errors = sum(run(b) for b in blocks)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errors = sum(pool.map(run, blocks))
    sep_hat = errors / trials
    stderr = math.sqrt(max(sep_hat * (1.0 - sep_hat), 0.0) / trials)
    return SimEstimate(sep_hat=sep_hat, stderr=stderr, trials=trials, errors=errors, seed=seed)
