"""SEP analysis and constellation optimization for noncoherent ASK over
correlated Rician SIMO channels.

The package builds channel covariance families and their eigenstructures,
models one- and two-sided amplitude constellations, implements the optimal
noncoherent ML detector with a deterministic Monte-Carlo harness, evaluates
pairwise error probabilities and SEP union bounds through a series c.d.f.
(with a Gaussian closed form for massive receive arrays), and minimizes the
union bound over per-level SNRs under an average-SNR constraint.
"""

from askopt._series import backend_name as series_backend
from askopt.channel import (
    ChannelSpec,
    CorrelationKind,
    CorrelationModel,
    EigenStructure,
    build_covariance,
    channel_eigen_structure,
    eigen_structure,
    los_mean,
    sample_channels,
)
from askopt.detector import (
    DetectorContext,
    SimEstimate,
    detect,
    detect_batch,
    detector_context,
    rotate,
    simulate_sep,
)
from askopt.modulation import (
    Constellation,
    Side,
    SnrProfile,
    constellation_from_gammas,
    equispaced_constellation,
    n_levels,
    snr_profile,
    snr_profile_from_gammas,
)
from askopt.optimizer import (
    GradientCheckReport,
    GradMode,
    OptimizationResult,
    OptimizerOptions,
    gradient_selfcheck,
    optimize,
    pep_gradient,
    union_bound_gradient,
)
from askopt.sep import (
    GaussianApprox,
    MgfDomainError,
    NumericalQualityWarning,
    PepTerms,
    SepBound,
    cdf_chi2,
    g_derivative,
    gamma_tilde,
    gaussian_approx_moments,
    mgf,
    pep,
    pep_antipodal,
    pep_terms,
    union_bound,
    union_bound_massive,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "series_backend",
    "ChannelSpec",
    "CorrelationKind",
    "CorrelationModel",
    "EigenStructure",
    "build_covariance",
    "channel_eigen_structure",
    "eigen_structure",
    "los_mean",
    "sample_channels",
    "Constellation",
    "Side",
    "SnrProfile",
    "constellation_from_gammas",
    "equispaced_constellation",
    "n_levels",
    "snr_profile",
    "snr_profile_from_gammas",
    "DetectorContext",
    "SimEstimate",
    "detect",
    "detect_batch",
    "detector_context",
    "rotate",
    "simulate_sep",
    "GaussianApprox",
    "MgfDomainError",
    "NumericalQualityWarning",
    "PepTerms",
    "SepBound",
    "cdf_chi2",
    "g_derivative",
    "gamma_tilde",
    "gaussian_approx_moments",
    "mgf",
    "pep",
    "pep_antipodal",
    "pep_terms",
    "union_bound",
    "union_bound_massive",
    "GradMode",
    "GradientCheckReport",
    "OptimizationResult",
    "OptimizerOptions",
    "gradient_selfcheck",
    "optimize",
    "pep_gradient",
    "union_bound_gradient",
]
