"""End-to-end acceptance checks, one per shipped guarantee.

Each test prints a single `ACCEPTANCE <id>: PASS/FAIL` line (outside pytest's
capture) with the measured numbers, then asserts the guarantee at its stated
tolerance and runtime budget.
"""

from __future__ import annotations

import math
import os
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest

from askopt.detector import detector_context, simulate_sep
from askopt.modulation import Side, equispaced_constellation, snr_profile
from askopt.optimizer import OptimizerOptions, gradient_selfcheck, optimize, pep_gradient
from askopt.sep import (
    PepTerms,
    cdf_chi2,
    pep,
    pep_antipodal,
    pep_terms,
    union_bound,
    union_bound_massive,
)
from helpers import (
    equispaced_profile,
    fd_pep_richardson,
    make_eig,
    random_instance,
    sample_statistic_fast,
)

_FAMILIES = (("iid", None), ("uniform", 0.5), ("exponential", 0.5))


def _report(capsys, tag: str, ok: bool, details: str) -> None:
    with capsys.disabled():
        print(f"\nACCEPTANCE {tag}: {'PASS' if ok else 'FAIL'} — {details}")


def _bound(side, m, gamma_av, eig, xi=2000):
    # the smallest bounds (two-sided, n >= 8) legitimately emit a series-depth
    # quality warning at the default budget; the ordering checks below compare
    # values separated by decades, far beyond the ~0.1% residual truncation
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return union_bound(equispaced_profile(side, m, gamma_av), eig, xi).value


# -----------------------------------------------------------------------------
# 1. single-term reduction of the series c.d.f. against the exponential law
# -----------------------------------------------------------------------------


def test_series_cdf_reduces_to_exponential(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    for beta in (0.5, 1.0, 2.0):
        terms = PepTerms(
            i=0,
            j=1,
            alpha=0.0,
            beta=np.array([beta]),
            gamma=np.array([0.0]),
            k_sums=np.array([0.0]),
            q=np.array([1.0]),
        )
        for ratio in np.linspace(0.1, 10.0, 40):
            x = beta * float(ratio)
            err = abs(cdf_chi2(terms, x, 2000) - (1.0 - math.exp(-x / beta)))
            worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-3 and elapsed < 10.0
    _report(capsys, "1", ok, f"max |cdf - (1 - e^(-x/b))| = {worst:.3e} (tol 1e-3), {elapsed:.1f}s")
    assert worst <= 1e-3
    assert elapsed < 10.0


# -----------------------------------------------------------------------------
# 2. series c.d.f. against 1e7 direct draws of the pairwise decision statistic
# -----------------------------------------------------------------------------


def test_statistic_cdf_matches_direct_draws(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2026)
    draws_total = 10_000_000
    chunk = 2_500_000
    worst = 0.0
    for _ in range(5):
        spec, eig, snr = random_instance(rng, max_n=8)
        lv = snr.levels_of_symbols
        pair = next(
            (i, j)
            for i in range(snr.m)
            for j in range(snr.m)
            if i != j and lv[i] != lv[j] and snr.gamma_of_symbol(i) > snr.gamma_of_symbol(j)
        )
        terms = pep_terms(*pair, snr, eig)
        pilot = sample_statistic_fast(terms, 100_000, rng)
        grid = np.quantile(pilot, np.linspace(0.02, 0.98, 15))
        counts = np.zeros(grid.size)
        for _ in range(draws_total // chunk):
            x = sample_statistic_fast(terms, chunk, rng)
            counts += (x[:, None] <= grid[None, :]).sum(axis=0)
        empirical = counts / draws_total
        exact = np.array([cdf_chi2(terms, float(g), 2000) for g in grid])
        worst = max(worst, float(np.max(np.abs(empirical - exact))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 2e-3 and elapsed < 300.0
    _report(
        capsys,
        "2",
        ok,
        f"5 instances x 1e7 draws, max |emp - cdf| = {worst:.3e} (tol 2e-3), {elapsed:.0f}s",
    )
    assert worst <= 2e-3
    assert elapsed < 300.0


# -----------------------------------------------------------------------------
# 3. simulated SEP never exceeds the union bound, and the bound stays tight
# -----------------------------------------------------------------------------


def test_simulation_respects_union_bound_across_grid(capsys):
    t0 = time.perf_counter()
    trials = 1_000_000
    violations: list[str] = []
    worst_margin = -np.inf  # (sim - bound)/stderr, should stay <= 3
    worst_ratio = 0.0
    n_points = n_eligible = 0
    seed = 0
    for side in (Side.ONE_SIDED, Side.TWO_SIDED):
        for fam, eps in _FAMILIES:
            for n in (4, 8):
                for k_av in (1.0, 2.0):
                    spec, eig = make_eig(fam, n=n, eps=eps, k_av=k_av)
                    for db in range(0, 31, 5):
                        gamma_av = 10.0 ** (db / 10.0)
                        with warnings.catch_warnings():
                            warnings.simplefilter("ignore")
                            bound = union_bound(
                                equispaced_profile(side, 4, gamma_av), eig, 2000
                            ).value
                        con = equispaced_constellation(side, 4, e_av=gamma_av)
                        est = simulate_sep(detector_context(con, spec, eig), trials, seed)
                        seed += 1
                        n_points += 1
                        label = f"{side.value}/{fam}/n={n}/K={k_av}/{db}dB"
                        margin = (est.sep_hat - bound) / max(est.stderr, 1e-300)
                        worst_margin = max(worst_margin, margin)
                        if est.sep_hat > bound + 3.0 * est.stderr:
                            violations.append(f"{label}: sim {est.sep_hat:.3e} > bound {bound:.3e}")
                        # the tightness ratio is only statistically meaningful
                        # once enough errors were actually observed
                        if est.sep_hat <= 1e-2 and est.errors >= 100:
                            n_eligible += 1
                            ratio = bound / est.sep_hat
                            worst_ratio = max(worst_ratio, ratio)
                            if ratio > 3.0:
                                violations.append(f"{label}: bound/sim = {ratio:.2f}")
    elapsed = time.perf_counter() - t0
    ok = not violations and elapsed < 1800.0
    _report(
        capsys,
        "3",
        ok,
        f"{n_points} points (24 configs x 7 SNRs, 1e6 trials): worst (sim-bound)/stderr = "
        f"{worst_margin:.2f} (lim 3), worst bound/sim = {worst_ratio:.2f} over "
        f"{n_eligible} eligible points (lim 3), {elapsed:.0f}s"
        + (f"; violations: {violations[:4]}" if violations else ""),
    )
    assert not violations, violations[:10]
    assert elapsed < 1800.0


# -----------------------------------------------------------------------------
# 4. antipodal closed form against a restricted two-symbol Monte Carlo
# -----------------------------------------------------------------------------


def test_antipodal_closed_form_matches_two_symbol_mc(capsys):
    t0 = time.perf_counter()
    sets = [
        ("iid", 4, None, 1.0, 5.0),
        ("uniform", 6, 0.4, 2.0, 8.0),
        ("exponential", 3, 0.7, 1.5, 3.0),
        ("iid", 8, None, 0.5, 10.0),
        ("exponential", 8, 0.3, 2.5, 0.0),
    ]
    worst_sigma = 0.0
    for k, (fam, n, eps, k_av, db) in enumerate(sets):
        spec, eig = make_eig(fam, n=n, eps=eps, k_av=k_av)
        gamma_av = 10.0 ** (db / 10.0)
        con = equispaced_constellation(Side.TWO_SIDED, 2, e_av=gamma_av)
        snr = snr_profile(con, spec.sigma_h_sq, spec.sigma_n_sq)
        exact = pep_antipodal(0, snr, eig)
        est = simulate_sep(detector_context(con, spec, eig), 1_000_000, seed=k)
        worst_sigma = max(worst_sigma, abs(est.sep_hat - exact) / est.stderr)
    elapsed = time.perf_counter() - t0
    ok = worst_sigma <= 3.0 and elapsed < 120.0
    _report(
        capsys,
        "4",
        ok,
        f"5 sets x 1e6 trials: worst |sim - exact| = {worst_sigma:.2f} stderr (lim 3), {elapsed:.0f}s",
    )
    assert worst_sigma <= 3.0
    assert elapsed < 120.0


# -----------------------------------------------------------------------------
# 5. analytic gradients against central finite differences
# -----------------------------------------------------------------------------


def _fd_resolvable(snr, eig) -> bool:
    # a central difference resolves a derivative only when the function values
    # sit well above the absolute evaluation noise of the series (~1e-13);
    # pairwise probabilities below 1e-6 miss that by orders of magnitude at
    # every step size (the difference quotient is then pure roundoff)
    return all(
        pep(i, j, snr, eig, 2000) >= 1e-6
        for i in range(snr.m)
        for j in range(snr.m)
        if i != j
    )


def test_gradients_match_central_differences(capsys):
    # the randomized suite draws moderate average SNRs and redraws until every
    # pairwise probability is finite-difference resolvable; the analytic path
    # at more extreme operating points is covered by the optimizer unit tests
    # under a difference-quotient noise envelope
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    suite = []
    redraws = 0
    while len(suite) < 20:
        instance = random_instance(rng, max_n=8, gamma_exp_range=(0.0, 1.5))
        if _fd_resolvable(instance[2], instance[1]):
            suite.append(instance)
        else:
            redraws += 1
            assert redraws < 200, "suite generation stalled"
    worst_pep = 0.0
    worst_ub = 0.0
    n_pep = 0
    for spec, eig, snr in suite:
        worst_ub = max(worst_ub, gradient_selfcheck(snr, eig, xi=2000, step=1e-4).max_rel_error)
        for i in range(snr.m):
            for j in range(snr.m):
                if i == j:
                    continue
                for t in (i, j):
                    an = pep_gradient(i, j, t, snr, eig, xi=2000)
                    fd = fd_pep_richardson(i, j, t, snr, eig, xi=2000)
                    if an == 0.0 and fd == 0.0:
                        continue
                    worst_pep = max(worst_pep, abs(an - fd) / max(abs(an), abs(fd)))
                    n_pep += 1
    elapsed = time.perf_counter() - t0
    ok = worst_pep <= 1e-4 and worst_ub <= 1e-4 and elapsed < 600.0
    _report(
        capsys,
        "5",
        ok,
        f"20 instances ({redraws} redraws): pep_gradient worst rel err {worst_pep:.2e} over "
        f"{n_pep} partials, union_bound_gradient worst rel err {worst_ub:.2e} (tol 1e-4), {elapsed:.0f}s",
    )
    assert worst_pep <= 1e-4
    assert worst_ub <= 1e-4
    assert elapsed < 600.0


# -----------------------------------------------------------------------------
# 6. the optimizer strictly beats the equispaced baseline
# -----------------------------------------------------------------------------


def test_optimizer_beats_equispaced_across_grid(capsys):
    t0 = time.perf_counter()
    # the guarantee under test is strict improvement, not full convergence:
    # 80 iterations realize nearly all of the attainable gain (m=8 descents
    # keep polishing far past that), and keep the grid inside the time budget
    opts = OptimizerOptions(restarts=0, xi=2000, max_iters=80)
    failures: list[str] = []
    worst_gain = 0.0
    for fam, eps in _FAMILIES:
        for n in (4, 8):
            spec, eig = make_eig(fam, n=n, eps=eps, k_av=1.0)
            for m in (4, 8):
                for db in (10.0, 20.0):
                    gamma_av = 10.0 ** (db / 10.0)
                    res = optimize(Side.ONE_SIDED, m, gamma_av, eig, opts)
                    worst_gain = max(worst_gain, res.sep_opt / res.sep_equispaced)
                    if not res.sep_opt < res.sep_equispaced:
                        failures.append(f"{fam}/n={n}/m={m}/{db}dB not improved")
    # saturation escape at 30 dB: at least one configuration per family where
    # the optimized bound is at most half the equispaced bound
    sat_ratios = {}
    for fam, eps in _FAMILIES:
        best = np.inf
        for n in (8, 4):
            spec, eig = make_eig(fam, n=n, eps=eps, k_av=1.0)
            for m in (4, 8):
                res = optimize(Side.ONE_SIDED, m, 1000.0, eig, opts)
                best = min(best, res.sep_opt / res.sep_equispaced)
                if best <= 0.5:
                    break
            if best <= 0.5:
                break
        sat_ratios[fam] = best
        if best > 0.5:
            failures.append(f"{fam}: best 30dB ratio {best:.3f} > 0.5")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 1200.0
    sat = ", ".join(f"{k}={v:.3f}" for k, v in sat_ratios.items())
    _report(
        capsys,
        "6",
        ok,
        f"24 configs strictly improved (worst opt/eq = {worst_gain:.4f}); "
        f"30dB best ratios: {sat} (need <= 0.5), {elapsed:.0f}s"
        + (f"; failures: {failures}" if failures else ""),
    )
    assert not failures, failures
    assert elapsed < 1200.0


# -----------------------------------------------------------------------------
# 7. bound orderings follow the channel structure
# -----------------------------------------------------------------------------


def test_bound_orderings_follow_channel_structure(capsys):
    gamma_av = 10.0
    msgs: list[str] = []
    ok = True

    def check(cond: bool, label: str) -> None:
        nonlocal ok
        if not cond:
            ok = False
            msgs.append(label)

    # (a) two-sided equispaced never loses to one-sided equispaced
    for fam, eps in _FAMILIES:
        _, eig = make_eig(fam, n=4, eps=eps, k_av=1.0)
        b_two = _bound(Side.TWO_SIDED, 4, gamma_av, eig)
        b_one = _bound(Side.ONE_SIDED, 4, gamma_av, eig)
        check(b_two <= b_one, f"(a) {fam}: two {b_two:.3e} > one {b_one:.3e}")

    for side in (Side.ONE_SIDED, Side.TWO_SIDED):
        # (b) less correlation diversity loss: iid <= exponential <= uniform
        bounds = {}
        for fam, eps in _FAMILIES:
            _, eig = make_eig(fam, n=4, eps=eps, k_av=1.0)
            bounds[fam] = _bound(side, 4, gamma_av, eig)
        check(
            bounds["iid"] <= bounds["exponential"] <= bounds["uniform"],
            f"(b) {side.value}: {bounds}",
        )
        # (c) bound nondecreasing in the correlation coefficient
        for fam in ("uniform", "exponential"):
            curve = []
            for eps in np.arange(0.1, 0.95, 0.1):
                _, eig = make_eig(fam, n=4, eps=float(eps), k_av=1.0)
                curve.append(_bound(side, 4, gamma_av, eig))
            check(
                all(b2 >= b1 * (1 - 1e-12) for b1, b2 in zip(curve, curve[1:])),
                f"(c) {side.value}/{fam}: {np.round(curve, 6)}",
            )
        # (d) bound decreasing in the antenna count and in the LoS strength
        by_n = []
        for n in (4, 8, 16):
            _, eig = make_eig("iid", n=n, k_av=1.0)
            by_n.append(_bound(side, 4, gamma_av, eig))
        check(by_n[0] > by_n[1] > by_n[2], f"(d) {side.value} vs n: {by_n}")
        by_k = []
        for k_av in (1.0, 2.0):
            _, eig = make_eig("iid", n=4, k_av=k_av)
            by_k.append(_bound(side, 4, gamma_av, eig))
        check(by_k[0] > by_k[1], f"(d) {side.value} vs K: {by_k}")

    _report(
        capsys,
        "7",
        ok,
        "orderings (a) two<=one, (b) iid<=exp<=unif, (c) nondecreasing in eps, "
        "(d) decreasing in n and K_av — all hold at 10 dB, M=4"
        + (f"; violations: {msgs}" if msgs else ""),
    )
    assert ok, msgs


# -----------------------------------------------------------------------------
# 8. Gaussian closed form for very large arrays
# -----------------------------------------------------------------------------


def _massive_rel_errors(k_av: float, gamma_of_n) -> dict[int, float]:
    out = {}
    for n in (8, 16, 32, 64):
        _, eig = make_eig("iid", n=n, k_av=k_av)
        snr = equispaced_profile(Side.ONE_SIDED, 4, gamma_of_n(n))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            series = union_bound(snr, eig, 2000).value
            gauss = union_bound_massive(snr, eig).value
        out[n] = abs(gauss - series) / series
    return out


def test_massive_array_bound_in_accumulation_regime(capsys):
    # hold the TOTAL collected SNR at 10 dB while the array grows, so each
    # pairwise statistic is a sum of many comparably small contributions —
    # the regime where a central-limit closed form is meaningful
    t0 = time.perf_counter()
    details = []
    ok = True
    for k_av in (0.0, 1.0, 2.0):
        errs = _massive_rel_errors(k_av, lambda n: 10.0 / n)
        vals = list(errs.values())
        details.append(f"K={k_av}: " + ", ".join(f"N={n} {e:.2%}" for n, e in errs.items()))
        if vals[-1] > 0.05:
            ok = False
        if k_av == 0.0 and not all(b <= a * (1 + 1e-9) for a, b in zip(vals, vals[1:])):
            ok = False
    elapsed = time.perf_counter() - t0
    _report(
        capsys,
        "8a",
        ok,
        f"fixed 10 dB total SNR: within 5% at N=64 for K_av in {{0,1,2}} and "
        f"nonincreasing over N at K_av=0 ({'; '.join(details)}), {elapsed:.0f}s",
    )
    assert ok, details
    assert elapsed < 300.0


@pytest.mark.xfail(
    strict=True,
    reason=(
        "with the per-branch SNR held at 10 dB, every pairwise z-score grows "
        "like sqrt(N), so the Gaussian tail and the exact tail separate "
        "exponentially in N; the relative gap increases with N and exceeds 5% "
        "at N=64 (verified against 2e6-trial simulation, which sides with the "
        "series bound)"
    ),
)
def test_massive_array_bound_at_fixed_per_branch_snr(capsys):
    t0 = time.perf_counter()
    errs = _massive_rel_errors(1.0, lambda n: 10.0)
    vals = list(errs.values())
    nonincreasing = all(b <= a * (1 + 1e-9) for a, b in zip(vals, vals[1:]))
    ok = vals[-1] <= 0.05 and nonincreasing
    _report(
        capsys,
        "8b",
        ok,
        "fixed 10 dB per-branch SNR, K_av=1: "
        + ", ".join(f"N={n} {e:.2%}" for n, e in errs.items())
        + f" — error grows with N, {time.perf_counter() - t0:.0f}s",
    )
    assert vals[-1] <= 0.05, errs
    assert nonincreasing, errs


# -----------------------------------------------------------------------------
# 9. CLI artifacts are byte-identical across re-runs, including parallel ones
# -----------------------------------------------------------------------------


def _run_cli(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "askopt.cli", *args],
        cwd=cwd,
        capture_output=True,
        text=True,
        env=os.environ.copy(),
    )


def test_cli_artifacts_are_deterministic(tmp_path, capsys):
    t0 = time.perf_counter()
    (tmp_path / "sweep.yaml").write_text(
        "channel: {n: 2}\n"
        "sweep:\n"
        "  gamma_av_db: {start: 0, stop: 10, step: 5}\n"
        "trials: 20000\n"
        "seed: 3\n"
        "xi: 300\n"
    )
    (tmp_path / "corr.yaml").write_text(
        "channel:\n"
        "  n: 2\n"
        "  correlation: {kind: uniform, epsilon: 0.5}\n"
        "sweep:\n"
        "  epsilon: {start: 0.2, stop: 0.6, step: 0.2}\n"
        "scheme: both\n"
        "xi: 200\n"
        "optimizer: {max_iters: 25, restarts: 0}\n"
    )
    (tmp_path / "opt.yaml").write_text(
        "channel: {n: 2}\n"
        "gamma_av_db: 12\n"
        "xi: 300\n"
        "optimizer: {max_iters: 60, restarts: 1}\n"
    )
    (tmp_path / "con.yaml").write_text(
        "modulation: {side: two_sided, m: 4}\n"
        "grid:\n"
        "  n: [2, 4]\n"
        "  gamma_av_db: [0, 10]\n"
        "xi: 200\n"
    )
    runs = [
        ("sep-sweep", ["--config", "sweep.yaml", "--workers", "3"]),
        ("corr-sweep", ["--config", "corr.yaml"]),
        ("optimize", ["--config", "opt.yaml"]),
        ("constellation", ["--config", "con.yaml"]),
        ("simulate", ["--trials", "40000", "--seed", "2", "--workers", "2"]),
    ]
    identical = []
    for verb, extra in runs:
        out = tmp_path / f"{verb}.csv"
        blobs = []
        for _ in range(2):
            res = _run_cli([verb, *extra, "--out", str(out)], tmp_path)
            assert res.returncode == 0, (verb, res.stderr)
            blobs.append(out.read_bytes())
        identical.append(blobs[0] == blobs[1])
    # a different worker count may only show up in the recorded config line
    a = tmp_path / "w1.csv"
    b = tmp_path / "w3.csv"
    assert _run_cli(["sep-sweep", "--config", "sweep.yaml", "--workers", "1", "--out", str(a)], tmp_path).returncode == 0
    assert _run_cli(["sep-sweep", "--config", "sweep.yaml", "--workers", "3", "--out", str(b)], tmp_path).returncode == 0
    rows_a = [l for l in a.read_text().splitlines() if not l.startswith("#")]
    rows_b = [l for l in b.read_text().splitlines() if not l.startswith("#")]
    workers_invariant = rows_a == rows_b
    elapsed = time.perf_counter() - t0
    ok = all(identical) and workers_invariant
    _report(
        capsys,
        "9",
        ok,
        f"5 verbs re-run byte-identical: {identical}; data rows invariant to "
        f"worker count: {workers_invariant}, {elapsed:.0f}s",
    )
    assert all(identical)
    assert workers_invariant