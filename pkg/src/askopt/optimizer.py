"""Union-bound minimization over per-level SNRs under an average-SNR budget.

The problem is min P_UB(Gamma_1..Gamma_Mt) subject to sum Gamma = Mt*Gamma_av
with strictly increasing levels.  The solver is projected-gradient descent on
the affine slice, with ordering and a minimum inter-level gap enforced by an
exact Euclidean projection (isotonic regression with a floor, alternated with
the hyperplane via Dykstra's algorithm), Barzilai-Borwein steps safeguarded
by backtracking sufficient decrease, an equispaced start, and seeded
randomized restarts.  Gradients are exact: the series c.d.f. is differentiated
through its recursion (see askopt.sep) using closed-form partials of the
(alpha, beta, gamma) coefficients with respect to the two SNRs of a pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from askopt.channel import EigenStructure, _block_rng
from askopt.modulation import (
    Side,
    SnrProfile,
    equispaced_constellation,
    n_levels,
    snr_profile_from_gammas,
)
from askopt.sep import (
    PepTerms,
    _cdf_chi2_with_grad,
    _is_antipodal,
    gamma_tilde,
    pep_antipodal,
    union_bound,
)

__all__ = [
    "GradMode",
    "OptimizerOptions",
    "OptimizationResult",
    "GradientCheckReport",
    "pep_gradient",
    "union_bound_gradient",
    "optimize",
    "gradient_selfcheck",
]

_NEAR_EQUAL_REL = 1e-6


class GradMode(str, Enum):
    ANALYTIC = "analytic_grad"
    FINITE_DIFF = "finite_diff_grad"


@dataclass(frozen=True)
class OptimizerOptions:
    """Knobs for optimize(); min_gap=None resolves to 1e-3 * Gamma_av."""

    max_iters: int = 200
    grad_tol: float = 1e-8
    step_init: float = 1.0
    xi: int = 2000
    restarts: int = 5
    min_gap: float | None = None
    mode: GradMode = GradMode.ANALYTIC
    seed: int = 0
    fd_step: float = 1e-4

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not self.step_init > 0:
            raise ValueError("step_init must be positive")
        if self.xi < 1:
            raise ValueError("xi must be >= 1")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")
        if self.min_gap is not None and self.min_gap < 0:
            raise ValueError("min_gap must be >= 0")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        object.__setattr__(self, "mode", GradMode(self.mode))


@dataclass(frozen=True)
class OptimizationResult:
    """Best feasible point found, with the baseline it must not lose to."""

    gammas_opt: np.ndarray
    sep_opt: float
    sep_equispaced: float
    iterations: int
    grad_norm_final: float
    kkt_residual: float
    converged: bool


@dataclass(frozen=True)
class GradientCheckReport:
    """Per-component analytic vs central finite-difference comparison."""

    analytic: np.ndarray
    finite_diff: np.ndarray
    rel_errors: np.ndarray
    max_rel_error: float
    step: float


# ---------------------------------------------------------------------------
# Exact pairwise derivatives
# ---------------------------------------------------------------------------


def _pair_value_and_grads(
    gi: float,
    gj: float,
    phi_i: float,
    phi_j: float,
    eig: EigenStructure,
    xi: int,
) -> tuple[float, float, float]:
    """(P_{i->j}, dP/dGamma_i, dP/dGamma_j) for a distinct-SNR ordered pair.

    Builds the closed-form partials of beta, gamma and alpha with respect to
    each SNR and pushes them through the series c.d.f. in one kernel pass.
    """
    lam = eig.lambdas
    q = eig.mults
    kap = eig.k_sums
    a = gi * lam + 1.0
    b = gj * lam + 1.0
    d = lam * (gi - gj)
    u = np.sqrt(gi * lam) * phi_i - np.sqrt(gj * lam) * phi_j
    beta = d / b
    gamma_v = a * u**2 / d**2
    alpha = float(np.dot(q, np.log(a) - np.log(b)) + np.dot(kap, u**2 / d))
    du_i = phi_i * np.sqrt(lam / gi) / 2.0
    du_j = -phi_j * np.sqrt(lam / gj) / 2.0
    dbeta_i = lam / b
    dbeta_j = -a * lam / b**2
    dgamma_i = u**2 * lam / d**2 + 2.0 * a * u * du_i / d**2 - 2.0 * a * u**2 * lam / d**3
    dgamma_j = 2.0 * a * u * du_j / d**2 + 2.0 * a * u**2 * lam / d**3
    dalpha_i = float(np.sum(q * lam / a + kap * (2.0 * u * du_i / d - u**2 * lam / d**2)))
    dalpha_j = float(np.sum(-q * lam / b + kap * (2.0 * u * du_j / d + u**2 * lam / d**2)))
    terms = PepTerms(i=-1, j=-1, alpha=alpha, beta=beta, gamma=gamma_v, k_sums=kap, q=q)
    f, df = _cdf_chi2_with_grad(
        terms,
        alpha,
        xi,
        d_beta=np.stack([dbeta_i, dbeta_j]),
        d_gamma=np.stack([dgamma_i, dgamma_j]),
        d_x=np.array([dalpha_i, dalpha_j]),
    )
    if gi > gj:
        return f, float(df[0]), float(df[1])
    return 1.0 - f, -float(df[0]), -float(df[1])


def _antipodal_grad(gamma: float, eig: EigenStructure) -> float:
    """d/dGamma of Q(sqrt(gamma_tilde(Gamma))); 0 for a zero-mean channel."""
    lam = eig.lambdas
    kap = eig.k_sums
    gt = gamma_tilde(gamma, eig)
    if gt <= 0.0:
        return 0.0
    dgt = float(np.sum(2.0 * lam * kap / (gamma * lam + 1.0) ** 2))
    return -math.exp(-gt / 2.0) / (2.0 * math.sqrt(2.0 * math.pi * gt)) * dgt


def pep_gradient(
    i: int, j: int, t: int, snr: SnrProfile, eig: EigenStructure, xi: int = 2000
) -> float:
    """dP_{i->j}/dGamma_t for the symbol indices i, j and t in {i, j}.

    Any other t returns 0.  For the antipodal pair the two SNRs are the same
    variable, so either t yields the full derivative of Q(sqrt(gamma_tilde)).
    """
    if t != i and t != j:
        return 0.0
    if _is_antipodal(i, j, snr):
        return _antipodal_grad(snr.gamma_of_symbol(i), eig)
    _, dpi, dpj = _pair_value_and_grads(
        snr.gamma_of_symbol(i),
        snr.gamma_of_symbol(j),
        snr.sign_of_symbol(i),
        snr.sign_of_symbol(j),
        eig,
        xi,
    )
    return dpi if t == i else dpj


def _bound_value_and_grad(
    side: Side, gammas: np.ndarray, eig: EigenStructure, xi: int
) -> tuple[float, np.ndarray]:
    """Union bound and its gradient w.r.t. per-level SNRs in one pass.

    Each distinct (level_i, level_j, sign parity) pair is evaluated once and
    reused across the symbol double sum; the antipodal pair contributes its
    total derivative once per ordered symbol pair.
    """
    snr = snr_profile_from_gammas(side, gammas)
    m = snr.m
    lv = snr.levels_of_symbols
    grad = np.zeros(gammas.size)
    total = 0.0
    cache: dict = {}
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            if _is_antipodal(i, j, snr):
                key = ("antipodal", int(lv[i]))
                if key not in cache:
                    cache[key] = (
                        pep_antipodal(i, snr, eig),
                        _antipodal_grad(snr.gamma_of_symbol(i), eig),
                    )
                p, dq = cache[key]
                total += p
                grad[lv[i]] += dq
            else:
                key = (int(lv[i]), int(lv[j]), snr.sign_of_symbol(i) * snr.sign_of_symbol(j))
                if key not in cache:
                    cache[key] = _pair_value_and_grads(
                        snr.gamma_of_symbol(i),
                        snr.gamma_of_symbol(j),
                        snr.sign_of_symbol(i),
                        snr.sign_of_symbol(j),
                        eig,
                        xi,
                    )
                p, dpi, dpj = cache[key]
                total += p
                grad[lv[i]] += dpi
                grad[lv[j]] += dpj
    return total / m, grad / m


def union_bound_gradient(snr: SnrProfile, eig: EigenStructure, xi: int = 2000) -> np.ndarray:
    """Gradient of union_bound (at fixed series depth) w.r.t. level SNRs."""
    return _bound_value_and_grad(snr.side, snr.gammas, eig, xi)[1]


def _fd_gradient(
    side: Side, gammas: np.ndarray, eig: EigenStructure, xi: int, step: float
) -> np.ndarray:
    """Central finite differences of the union bound, steps capped so the
    bumped profiles stay strictly ordered and positive."""
    out = np.zeros(gammas.size)
    for t in range(gammas.size):
        gap_lo = gammas[t] if t == 0 else gammas[t] - gammas[t - 1]
        gap_hi = math.inf if t == gammas.size - 1 else gammas[t + 1] - gammas[t]
        h = min(step * gammas[t], 0.4 * min(gap_lo, gap_hi))
        if h <= 0.0:
            raise ValueError("finite-difference step collapsed; profile gaps too small")
        up = gammas.copy()
        up[t] += h
        dn = gammas.copy()
        dn[t] -= h
        f_up = union_bound(snr_profile_from_gammas(side, up), eig, xi, adaptive=False).value
        f_dn = union_bound(snr_profile_from_gammas(side, dn), eig, xi, adaptive=False).value
        out[t] = (f_up - f_dn) / (2.0 * h)
    return out


def gradient_selfcheck(
    snr: SnrProfile, eig: EigenStructure, xi: int = 2000, step: float = 1e-4
) -> GradientCheckReport:
    """Compare the analytic union-bound gradient against central differences."""
    analytic = union_bound_gradient(snr, eig, xi)
    fd = _fd_gradient(snr.side, snr.gammas, eig, xi, step)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-300)
    rel = np.abs(analytic - fd) / denom
    rel[(analytic == 0.0) & (fd == 0.0)] = 0.0
    return GradientCheckReport(
        analytic=analytic,
        finite_diff=fd,
        rel_errors=rel,
        max_rel_error=float(rel.max()) if rel.size else 0.0,
        step=step,
    )


# ---------------------------------------------------------------------------
# Feasible-set projection
# ---------------------------------------------------------------------------


def _pava_nondecreasing(y: np.ndarray) -> np.ndarray:
    """Isotonic (nondecreasing) least-squares fit via pool-adjacent-violators."""
    vals: list[float] = []
    counts: list[int] = []
    for v in y:
        vals.append(float(v))
        counts.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            v2 = vals.pop()
            c2 = counts.pop()
            v1 = vals.pop()
            c1 = counts.pop()
            vals.append((v1 * c1 + v2 * c2) / (c1 + c2))
            counts.append(c1 + c2)
    return np.repeat(vals, counts)


def _project_cone(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {0 <= y_1 <= ... <= y_n}."""
    return np.maximum(_pava_nondecreasing(y), 0.0)


def _project_feasible(x: np.ndarray, gamma_sum: float, min_gap: float) -> np.ndarray:
    """Project onto {sum g = gamma_sum, g_1 >= min_gap, g_{k+1}-g_k >= min_gap}.

    Substituting y_k = g_k - k*min_gap turns the gap constraints into the
    isotonic-with-floor cone; Dykstra's algorithm then alternates exact
    projections onto that cone and the shifted sum hyperplane.  The final
    hyperplane shift is uniform, so it leaves the gaps untouched and the sum
    exact.
    """
    n = x.size
    offs = min_gap * np.arange(1, n + 1, dtype=np.float64)
    target = gamma_sum - offs.sum()
    if target < -1e-12 * max(abs(gamma_sum), 1.0):
        raise ValueError("min_gap is too large for the SNR budget")
    y = x - offs
    z = y
    p = np.zeros(n)
    qv = np.zeros(n)
    scale = max(float(np.max(np.abs(y))), abs(target), 1.0)
    for _ in range(2000):
        w = z + p
        zc = _project_cone(w)
        p_new = w - zc
        w2 = zc + qv
        zh = w2 + (target - w2.sum()) / n
        qv_new = w2 - zh
        # the iterate alone can be momentarily stationary while the correction
        # vectors still move, so require all three to settle before stopping
        done = (
            np.max(np.abs(zh - z)) <= 1e-15 * scale
            and np.max(np.abs(p_new - p)) <= 1e-15 * scale
            and np.max(np.abs(qv_new - qv)) <= 1e-15 * scale
        )
        z, p, qv = zh, p_new, qv_new
        if done:
            break
    z = _project_cone(z)
    z = z + (target - z.sum()) / n
    return z + offs


# ---------------------------------------------------------------------------
# Projected-gradient descent
# ---------------------------------------------------------------------------


def _descend(
    x0: np.ndarray,
    value_and_grad,
    value_only,
    project,
    gamma_av: float,
    opts: OptimizerOptions,
) -> tuple[np.ndarray, float, np.ndarray, int, bool]:
    """One projected-gradient run from x0: BB steps + Armijo backtracking.

    Returns (x, f, grad, iterations, converged); accepted iterates never
    increase the objective.
    """
    x = project(x0)
    f, g = value_and_grad(x)
    t_unit = gamma_av / max(float(np.linalg.norm(g)), 1e-300)
    t = opts.step_init * t_unit
    iterations = 0
    converged = False
    for it in range(opts.max_iters):
        residual = float(np.linalg.norm(x - project(x - g)))
        if residual <= opts.grad_tol:
            converged = True
            break
        accepted = False
        tt = t
        x_new = x
        f_new = f
        for _ in range(60):
            cand = project(x - tt * g)
            dx = cand - x
            move = float(np.linalg.norm(dx))
            if move <= 1e-16 * gamma_av:
                break
            f_cand = value_only(cand)
            if f_cand <= f - 1e-4 / tt * move**2:
                x_new, f_new, accepted = cand, f_cand, True
                break
            tt *= 0.5
        if not accepted:
            break
        f_next, g_next = f_new, value_and_grad(x_new)[1]
        s_vec = x_new - x
        y_vec = g_next - g
        sy = float(np.dot(s_vec, y_vec))
        if sy > 0.0:
            t = float(np.dot(s_vec, s_vec)) / sy
            t = min(max(t, 1e-12 * t_unit), 1e12 * t_unit)
        else:
            t = tt * 2.0
        x, f, g = x_new, f_next, g_next
        iterations = it + 1
    return x, f, g, iterations, converged


def optimize(
    side: Side,
    m: int,
    gamma_av: float,
    eig: EigenStructure,
    opts: OptimizerOptions | None = None,
) -> OptimizationResult:
    """Minimize the SEP union bound over per-level SNRs at fixed average SNR.

    Seeded at the equispaced profile (so the result can never be worse than
    it) with opts.restarts additional randomized starts; the series depth is
    held fixed at opts.xi so objective and gradient are consistent.
    """
    if not gamma_av > 0:
        raise ValueError("gamma_av must be positive")
    opts = opts or OptimizerOptions()
    side = Side(side)
    mt = n_levels(side, m)
    min_gap = opts.min_gap if opts.min_gap is not None else 1e-3 * gamma_av
    gamma_sum = mt * gamma_av

    eq = equispaced_constellation(side, m, e_av=gamma_av)
    eq_gammas = np.unique(eq.symbols**2)
    if eq_gammas.size != mt:
        raise AssertionError("equispaced profile does not have one SNR per level")

    def value_and_grad(g: np.ndarray) -> tuple[float, np.ndarray]:
        if opts.mode is GradMode.FINITE_DIFF:
            guarded = _guard_near_equal(g, gamma_av)
            value = union_bound(
                snr_profile_from_gammas(side, guarded), eig, opts.xi, adaptive=False
            ).value
            return value, _fd_gradient(side, guarded, eig, opts.xi, opts.fd_step)
        return _bound_value_and_grad(side, _guard_near_equal(g, gamma_av), eig, opts.xi)

    def value_only(g: np.ndarray) -> float:
        return union_bound(
            snr_profile_from_gammas(side, _guard_near_equal(g, gamma_av)),
            eig,
            opts.xi,
            adaptive=False,
        ).value

    sep_equispaced = value_only(eq_gammas)

    if mt == 1:
        gammas = np.array([gamma_av])
        grad = union_bound_gradient(snr_profile_from_gammas(side, gammas), eig, opts.xi)
        return OptimizationResult(
            gammas_opt=gammas,
            sep_opt=sep_equispaced,
            sep_equispaced=sep_equispaced,
            iterations=0,
            grad_norm_final=float(np.linalg.norm(grad)),
            kkt_residual=0.0,
            converged=True,
        )

    def project(g: np.ndarray) -> np.ndarray:
        return _project_feasible(g, gamma_sum, min_gap)

    starts = [eq_gammas]
    for r in range(opts.restarts):
        rng = _block_rng(opts.seed, r)
        starts.append(eq_gammas * np.exp(0.4 * rng.standard_normal(mt)))

    best: tuple[float, np.ndarray, np.ndarray, int, bool] | None = None
    total_iters = 0
    for x0 in starts:
        x, f, g, iters, conv = _descend(
            x0, value_and_grad, value_only, project, gamma_av, opts
        )
        total_iters += iters
        if best is None or f < best[0]:
            best = (f, x, g, iters, conv)
    assert best is not None
    f_best, x_best, g_best, _, conv_best = best
    eta = -float(np.mean(g_best))
    kkt = float(np.linalg.norm(g_best + eta))
    return OptimizationResult(
        gammas_opt=x_best,
        sep_opt=f_best,
        sep_equispaced=sep_equispaced,
        iterations=total_iters,
        grad_norm_final=float(np.linalg.norm(g_best)),
        kkt_residual=kkt,
        converged=conv_best,
    )


def _guard_near_equal(gammas: np.ndarray, gamma_av: float) -> np.ndarray:
    """Separate near-equal adjacent levels by a one-sided perturbation so the
    pairwise denominators Gamma_i - Gamma_j stay well away from zero."""
    floor = _NEAR_EQUAL_REL * gamma_av
    out = np.array(gammas, dtype=np.float64, copy=True)
    for k in range(1, out.size):
        if out[k] - out[k - 1] < floor:
            out[k] = out[k - 1] + floor
    return out
