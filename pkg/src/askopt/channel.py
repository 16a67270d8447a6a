"""Correlated Rician SIMO channel models and their eigenstructure.

The receive covariance K_h = sigma_h_sq * U diag(lambda) U^H is one of three
families (iid, uniform, exponential); the line-of-sight mean mu enters all
error-rate formulas only through the rotated per-eigenvector Rician factors
k_{q,p} = |mu_tilde_{q,p}|^2 / (sigma_h_sq * lambda_p).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

_HERMITIAN_TOL = 1e-12
_BLOCK_SIZE = 1 << 16


class CorrelationKind(str, Enum):
    IID = "iid"
    UNIFORM = "uniform"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class CorrelationModel:
    """Branch correlation family; epsilon is the coefficient for the
    correlated families and must be omitted for iid."""

    kind: CorrelationKind
    epsilon: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", CorrelationKind(self.kind))
        if self.kind is CorrelationKind.IID:
            if self.epsilon is not None:
                raise ValueError("iid correlation takes no epsilon")
        else:
            if self.epsilon is None:
                raise ValueError(f"{self.kind.value} correlation requires epsilon")
            if self.epsilon == 0.0:
                raise ValueError("epsilon = 0 is expressed by the iid model")

    def validate_for(self, n: int) -> None:
        """Check epsilon against the validity interval for n antennas."""
        if self.kind is CorrelationKind.UNIFORM:
            if n < 2:
                raise ValueError("uniform correlation requires n >= 2")
            lo = -1.0 / (n - 1)
            if not lo < self.epsilon < 1.0:
                raise ValueError(
                    f"uniform epsilon must lie in ({lo:.6g}, 1), got {self.epsilon}"
                )
        elif self.kind is CorrelationKind.EXPONENTIAL:
            if not -1.0 < self.epsilon < 1.0:
                raise ValueError(f"exponential epsilon must lie in (-1, 1), got {self.epsilon}")


@dataclass(frozen=True)
class ChannelSpec:
    """Full channel description: size, powers, correlation family, LoS mean."""

    n: int
    sigma_h_sq: float
    sigma_n_sq: float
    correlation: CorrelationModel
    mean: np.ndarray

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        if not self.sigma_h_sq > 0:
            raise ValueError("sigma_h_sq must be positive")
        if not self.sigma_n_sq > 0:
            raise ValueError("sigma_n_sq must be positive")
        mean = np.asarray(self.mean, dtype=np.complex128).reshape(-1)
        if mean.shape != (self.n,):
            raise ValueError(f"mean must have length n={self.n}")
        object.__setattr__(self, "mean", mean)
        self.correlation.validate_for(self.n)


def los_mean(
    n: int,
    sigma_h_sq: float,
    k_av: float,
    phases: np.ndarray | None = None,
) -> np.ndarray:
    """Equal-magnitude LoS mean: mu_l = sigma_h*sqrt(k_av)*exp(j*theta_l).

    With iid branches this realizes the average Rician factor k_av exactly.
    """
    if k_av < 0:
        raise ValueError("k_av must be nonnegative")
    theta = np.zeros(n) if phases is None else np.asarray(phases, dtype=np.float64)
    if theta.shape != (n,):
        raise ValueError(f"phases must have length n={n}")
    return np.sqrt(sigma_h_sq * k_av) * np.exp(1j * theta)


def build_covariance(model: CorrelationModel, n: int, sigma_h_sq: float) -> np.ndarray:
    """Return the n-by-n Hermitian PD covariance of the requested family."""
    model.validate_for(n)
    if not sigma_h_sq > 0:
        raise ValueError("sigma_h_sq must be positive")
    if model.kind is CorrelationKind.IID:
        corr = np.eye(n)
    elif model.kind is CorrelationKind.UNIFORM:
        corr = np.full((n, n), model.epsilon)
        np.fill_diagonal(corr, 1.0)
    else:
        idx = np.arange(n)
        corr = np.asarray(model.epsilon, dtype=np.float64) ** np.abs(idx[:, None] - idx[None, :])
    return (sigma_h_sq * corr).astype(np.complex128)


@dataclass(frozen=True)
class EigenStructure:
    """Grouped eigen-decomposition of a channel covariance.

    lambdas holds the L distinct normalized eigenvalues in ascending order
    with multiplicities mults; u's columns are ordered to match, so column j
    carries normalized eigenvalue lambdas_full[j].  k_factors[p] lists the
    per-eigenvector Rician factors of group p and k_av is their grand mean
    over all n branches.
    """

    lambdas: np.ndarray
    mults: np.ndarray
    k_factors: tuple[np.ndarray, ...]
    k_av: float
    u: np.ndarray
    sigma_h_sq: float
    mu_tilde: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def lambdas_full(self) -> np.ndarray:
        return np.repeat(self.lambdas, self.mults)

    @property
    def k_sums(self) -> np.ndarray:
        """Per-group totals sum_q k_{q,p} (length L)."""
        return np.array([k.sum() for k in self.k_factors])


def _group_ascending(lambdas: np.ndarray, group_tol: float) -> list[slice]:
    """Slice ascending eigenvalues into groups of relative spread <= group_tol."""
    bounds = [0]
    for i in range(1, lambdas.shape[0]):
        start = lambdas[bounds[-1]]
        if lambdas[i] - start > group_tol * max(abs(start), 1.0):
            bounds.append(i)
    bounds.append(lambdas.shape[0])
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def _assemble(
    lambdas_full: np.ndarray,
    u: np.ndarray,
    mean: np.ndarray,
    sigma_h_sq: float,
    group_slices: list[slice],
) -> EigenStructure:
    mu_tilde = u.conj().T @ mean
    k_full = np.abs(mu_tilde) ** 2 / (sigma_h_sq * lambdas_full)
    lambdas = np.array([lambdas_full[s].mean() for s in group_slices])
    mults = np.array([s.stop - s.start for s in group_slices], dtype=np.int64)
    k_factors = tuple(k_full[s].copy() for s in group_slices)
    return EigenStructure(
        lambdas=lambdas,
        mults=mults,
        k_factors=k_factors,
        k_av=float(k_full.sum() / lambdas_full.shape[0]),
        u=u,
        sigma_h_sq=float(sigma_h_sq),
        mu_tilde=mu_tilde,
    )


def eigen_structure(
    cov: np.ndarray,
    mean: np.ndarray,
    sigma_h_sq: float,
    group_tol: float = 1e-9,
) -> EigenStructure:
    """Decompose an explicit Hermitian PD covariance matrix.

    Eigenvalues are normalized by sigma_h_sq, sorted ascending, and grouped
    by relative spread group_tol; mean is rotated into the eigenbasis.
    """
    cov = np.asarray(cov, dtype=np.complex128)
    n = cov.shape[0]
    if cov.shape != (n, n):
        raise ValueError("cov must be square")
    scale = max(float(np.linalg.norm(cov)), 1.0)
    if float(np.linalg.norm(cov - cov.conj().T)) > _HERMITIAN_TOL * scale:
        raise ValueError("cov must be Hermitian")
    if not sigma_h_sq > 0:
        raise ValueError("sigma_h_sq must be positive")
    mean = np.asarray(mean, dtype=np.complex128).reshape(-1)
    if mean.shape != (n,):
        raise ValueError("mean length must match cov")
    w, u = np.linalg.eigh(cov)
    lambdas_full = w / sigma_h_sq
    if np.any(lambdas_full <= 0):
        raise ValueError("cov must be positive definite")
    return _assemble(lambdas_full, u, mean, sigma_h_sq, _group_ascending(lambdas_full, group_tol))


def channel_eigen_structure(spec: ChannelSpec, group_tol: float = 1e-9) -> EigenStructure:
    """Eigenstructure for a ChannelSpec, using closed forms where the family
    admits them (iid: identity basis; uniform: DFT basis with eigenvalues
    1-eps and 1+(n-1)*eps) and numeric decomposition otherwise."""
    n = spec.n
    kind = spec.correlation.kind
    if kind is CorrelationKind.IID:
        lambdas_full = np.ones(n)
        u = np.eye(n, dtype=np.complex128)
        slices = [slice(0, n)]
    elif kind is CorrelationKind.UNIFORM:
        eps = float(spec.correlation.epsilon)
        a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        dft = np.exp(-2j * np.pi * a * b / n) / np.sqrt(n)
        lam_one = 1.0 + (n - 1) * eps  # ones-vector eigenvalue, column 0 of the DFT
        lam_rest = 1.0 - eps
        if lam_rest <= lam_one:
            order = list(range(1, n)) + [0]
            lambdas_full = np.array([lam_rest] * (n - 1) + [lam_one])
            slices = [slice(0, n - 1), slice(n - 1, n)]
        else:
            order = [0] + list(range(1, n))
            lambdas_full = np.array([lam_one] + [lam_rest] * (n - 1))
            slices = [slice(0, 1), slice(1, n)]
        u = dft[:, order]
    else:
        cov = build_covariance(spec.correlation, n, spec.sigma_h_sq)
        return eigen_structure(cov, spec.mean, spec.sigma_h_sq, group_tol)
    return _assemble(lambdas_full, u, spec.mean, spec.sigma_h_sq, slices)


def sample_channels(
    spec: ChannelSpec,
    eig: EigenStructure,
    count: int,
    seed: int,
) -> np.ndarray:
    """Draw `count` channel vectors h = mu + U diag(sigma_h*sqrt(lambda)) w.

    Trials are partitioned into fixed-size blocks, each driven by its own
    counter-keyed Philox stream, so results depend only on (seed, count).
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    out = np.empty((count, spec.n), dtype=np.complex128)
    scale = np.sqrt(spec.sigma_h_sq * eig.lambdas_full)
    ut = eig.u.T
    for block, start in enumerate(range(0, count, _BLOCK_SIZE)):
        stop = min(start + _BLOCK_SIZE, count)
        w = _block_cn01(seed, block, (stop - start, spec.n))
        out[start:stop] = spec.mean + (w * scale) @ ut
    return out


def _block_rng(seed: int, block: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    key = np.array([seed, block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _block_cn01(seed: int, block: int, shape: tuple[int, ...]) -> np.ndarray:
    """Unit-variance circular complex Gaussians for one trial block."""
    z = _block_rng(seed, block).standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)
