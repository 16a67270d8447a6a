"""Batch experiment CLI: deterministic CSV artifacts for the standard sweeps.

Every artifact starts with a '#'-prefixed header block carrying the package
version and the full resolved config as canonical JSON; re-running the same
verb from that config reproduces the file byte for byte.  Rows are written in
grid order; on a per-point failure the rows so far are flushed with a
'# FAILED ...' marker row, the failing point is named on stderr, and the exit
code is 1 (config/usage errors exit 2).
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings

import numpy as np

from askopt import __version__
from askopt.channel import channel_eigen_structure
from askopt.config import (
    ConfigError,
    channel_spec_from,
    config_to_json,
    grid_values,
    load_config,
    optimizer_options_from,
    resolve_config,
)
from askopt.detector import detector_context, simulate_sep
from askopt.modulation import (
    Side,
    constellation_from_gammas,
    equispaced_constellation,
    n_levels,
    snr_profile_from_gammas,
)
from askopt.optimizer import optimize
from askopt.sep import NumericalQualityWarning, union_bound, union_bound_massive

__all__ = [
    "main",
    "run_snr_sweep",
    "run_corr_sweep",
    "run_optimize",
    "run_constellation_diagram",
    "run_simulate",
]

_SEP_SWEEP_COLUMNS = (
    "gamma_av_db",
    "scheme",
    "bound",
    "bound_massive",
    "sim_sep",
    "sim_stderr",
    "trials",
    "xi_used",
    "warnings",
)
_CORR_SWEEP_COLUMNS = ("epsilon", "scheme", "bound", "bound_massive", "xi_used", "warnings")
_OPTIMIZE_COLUMNS = ("level_index", "gamma_opt", "s_norm")
_SIMULATE_COLUMNS = ("gamma_av_db", "sep_hat", "stderr", "trials")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _header_lines(cfg: dict) -> list[str]:
    return [
        f"# askopt {__version__}",
        f"# experiment: {cfg['experiment']}",
        f"# config: {config_to_json(cfg)}",
        f"# seed: {cfg['seed']}",
        f"# xi: {cfg['xi']}",
    ]


def _write_artifact(
    path: str,
    cfg: dict,
    columns: tuple[str, ...],
    rows: list[list],
    extra_comments: tuple[str, ...] = (),
    failure: str | None = None,
) -> int:
    lines = _header_lines(cfg)
    lines.extend(extra_comments)
    lines.append(",".join(columns))
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    if failure is not None:
        lines.append(f"# FAILED {failure}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    if failure is not None:
        print(f"askopt: {failure}", file=sys.stderr)
        return 1
    return 0


def _schemes(cfg: dict) -> list[str]:
    if cfg["scheme"] == "both":
        return ["traditional", "optimized"]
    return [cfg["scheme"]]


def _gamma_linear(db: float) -> float:
    return float(10.0 ** (db / 10.0))


def _level_gammas(scheme: str, side: Side, m: int, gamma_av: float, eig, cfg: dict) -> np.ndarray:
    """Per-level SNRs of the requested scheme at the given average SNR."""
    if scheme == "traditional":
        eq = equispaced_constellation(side, m, e_av=gamma_av)
        return np.unique(eq.symbols**2)
    result = optimize(side, m, gamma_av, eig, optimizer_options_from(cfg))
    return result.gammas_opt


def _out_path(cfg: dict, out_path: str | None) -> str:
    return out_path or cfg["output"] or f"{cfg['experiment']}.csv"


def run_snr_sweep(cfg: dict, out_path: str | None = None) -> int:
    """Bound (series + optional Gaussian) and optional simulated SEP per
    average-SNR grid point and scheme; the optimizer re-runs per point."""
    side = Side(cfg["modulation"]["side"])
    m = cfg["modulation"]["m"]
    spec = channel_spec_from(cfg)
    eig = channel_eigen_structure(spec)
    rows: list[list] = []
    failure = None
    for db in grid_values(cfg["sweep"]["gamma_av_db"]):
        for scheme in _schemes(cfg):
            try:
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always")
                    gamma_av = _gamma_linear(db)
                    gammas = _level_gammas(scheme, side, m, gamma_av, eig, cfg)
                    snr = snr_profile_from_gammas(side, gammas)
                    bound = union_bound(snr, eig, cfg["xi"])
                    massive = union_bound_massive(snr, eig).value if cfg["massive"] else None
                    sim_sep = sim_stderr = None
                    if cfg["trials"] > 0:
                        const = constellation_from_gammas(
                            side, gammas, spec.sigma_h_sq, spec.sigma_n_sq
                        )
                        ctx = detector_context(const, spec, eig)
                        est = simulate_sep(ctx, cfg["trials"], cfg["seed"], cfg["workers"])
                        sim_sep, sim_stderr = est.sep_hat, est.stderr
                n_warn = sum(
                    1 for w in caught if issubclass(w.category, NumericalQualityWarning)
                )
                rows.append(
                    [
                        db,
                        scheme,
                        bound.value,
                        massive,
                        sim_sep,
                        sim_stderr,
                        cfg["trials"],
                        bound.xi,
                        n_warn,
                    ]
                )
            except Exception as err:  # noqa: BLE001 - flush partial results
                failure = f"at gamma_av_db={_fmt(db)} scheme={scheme}: {err}"
                break
        if failure:
            break
    return _write_artifact(_out_path(cfg, out_path), cfg, _SEP_SWEEP_COLUMNS, rows, failure=failure)


def run_corr_sweep(cfg: dict, out_path: str | None = None) -> int:
    """Bound vs correlation coefficient at fixed average SNR."""
    side = Side(cfg["modulation"]["side"])
    m = cfg["modulation"]["m"]
    gamma_av = _gamma_linear(cfg["gamma_av_db"])
    rows: list[list] = []
    failure = None
    for eps in grid_values(cfg["sweep"]["epsilon"]):
        for scheme in _schemes(cfg):
            try:
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always")
                    spec = channel_spec_from(cfg, epsilon=eps)
                    eig = channel_eigen_structure(spec)
                    gammas = _level_gammas(scheme, side, m, gamma_av, eig, cfg)
                    snr = snr_profile_from_gammas(side, gammas)
                    bound = union_bound(snr, eig, cfg["xi"])
                    massive = union_bound_massive(snr, eig).value if cfg["massive"] else None
                n_warn = sum(
                    1 for w in caught if issubclass(w.category, NumericalQualityWarning)
                )
                rows.append([eps, scheme, bound.value, massive, bound.xi, n_warn])
            except Exception as err:  # noqa: BLE001 - flush partial results
                failure = f"at epsilon={_fmt(eps)} scheme={scheme}: {err}"
                break
        if failure:
            break
    return _write_artifact(_out_path(cfg, out_path), cfg, _CORR_SWEEP_COLUMNS, rows, failure=failure)


def run_optimize(cfg: dict, out_path: str | None = None) -> int:
    """Optimizer wrapper: one row per level plus result comment rows."""
    side = Side(cfg["modulation"]["side"])
    m = cfg["modulation"]["m"]
    gamma_av = _gamma_linear(cfg["gamma_av_db"])
    spec = channel_spec_from(cfg)
    eig = channel_eigen_structure(spec)
    try:
        result = optimize(side, m, gamma_av, eig, optimizer_options_from(cfg))
    except Exception as err:  # noqa: BLE001 - flush marker artifact
        return _write_artifact(
            _out_path(cfg, out_path),
            cfg,
            _OPTIMIZE_COLUMNS,
            [],
            failure=f"at gamma_av_db={_fmt(cfg['gamma_av_db'])}: {err}",
        )
    mt = n_levels(side, m)
    residual = abs(float(result.gammas_opt.sum()) - mt * gamma_av) / gamma_av
    extra = (
        f"# gamma_av_db: {_fmt(cfg['gamma_av_db'])}",
        f"# sep_opt: {_fmt(result.sep_opt)}",
        f"# sep_equispaced: {_fmt(result.sep_equispaced)}",
        f"# iterations: {result.iterations}",
        f"# converged: {_fmt(result.converged)}",
        f"# grad_norm_final: {_fmt(result.grad_norm_final)}",
        f"# kkt_residual: {_fmt(result.kkt_residual)}",
        f"# constraint_residual: {_fmt(residual)}",
    )
    rows = [
        [k, float(g), math.sqrt(float(g) / gamma_av)]
        for k, g in enumerate(result.gammas_opt)
    ]
    return _write_artifact(
        _out_path(cfg, out_path), cfg, _OPTIMIZE_COLUMNS, rows, extra_comments=extra
    )


def run_constellation_diagram(cfg: dict, out_path: str | None = None) -> int:
    """Normalized amplitudes s_m/sqrt(E_av) across the (n, gamma_av) grid."""
    side = Side(cfg["modulation"]["side"])
    m = cfg["modulation"]["m"]
    columns = (
        "scheme",
        "n",
        "gamma_av_db",
        "side",
        "m",
        *(f"s_{k + 1}" for k in range(m)),
    )
    ns = cfg["grid"]["n"] or [cfg["channel"]["n"]]
    dbs = cfg["grid"]["gamma_av_db"] or [cfg["gamma_av_db"]]
    rows: list[list] = []
    failure = None
    for n in ns:
        for db in dbs:
            for scheme in _schemes(cfg):
                try:
                    spec = channel_spec_from(cfg, n=n)
                    eig = channel_eigen_structure(spec)
                    gamma_av = _gamma_linear(db)
                    gammas = _level_gammas(scheme, side, m, gamma_av, eig, cfg)
                    snr = snr_profile_from_gammas(side, gammas)
                    s_norm = snr.signs * np.sqrt(
                        np.array([snr.gamma_of_symbol(i) for i in range(m)]) / gamma_av
                    )
                    rows.append([scheme, n, db, side.value, m, *map(float, s_norm)])
                except Exception as err:  # noqa: BLE001 - flush partial results
                    failure = f"at n={n} gamma_av_db={_fmt(db)} scheme={scheme}: {err}"
                    break
            if failure:
                break
        if failure:
            break
    return _write_artifact(_out_path(cfg, out_path), cfg, columns, rows, failure=failure)


def run_simulate(cfg: dict, out_path: str | None = None) -> int:
    """Monte-Carlo SEP at the configured operating point."""
    side = Side(cfg["modulation"]["side"])
    m = cfg["modulation"]["m"]
    if cfg["scheme"] == "both":
        raise ConfigError("simulate runs one scheme; use --traditional or --optimized")
    db = cfg["gamma_av_db"]
    rows: list[list] = []
    failure = None
    try:
        spec = channel_spec_from(cfg)
        eig = channel_eigen_structure(spec)
        gamma_av = _gamma_linear(db)
        gammas = _level_gammas(cfg["scheme"], side, m, gamma_av, eig, cfg)
        const = constellation_from_gammas(side, gammas, spec.sigma_h_sq, spec.sigma_n_sq)
        ctx = detector_context(const, spec, eig)
        est = simulate_sep(ctx, cfg["trials"], cfg["seed"], cfg["workers"])
        rows.append([db, est.sep_hat, est.stderr, est.trials])
    except Exception as err:  # noqa: BLE001 - flush marker artifact
        failure = f"at gamma_av_db={_fmt(db)}: {err}"
    return _write_artifact(_out_path(cfg, out_path), cfg, _SIMULATE_COLUMNS, rows, failure=failure)


_RUNNERS = {
    "sep_sweep": run_snr_sweep,
    "corr_sweep": run_corr_sweep,
    "optimize": run_optimize,
    "constellation": run_constellation_diagram,
    "simulate": run_simulate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="askopt",
        description="Deterministic SEP analysis sweeps for correlated-Rician ASK systems.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("sep-sweep", "corr-sweep", "optimize", "constellation", "simulate"):
        p = sub.add_parser(verb, help=f"run the {verb.replace('-', ' ')} experiment")
        p.add_argument("--config", help="YAML experiment config (defaults apply without it)")
        p.add_argument("--out", help="output CSV path (default: <experiment>.csv)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--trials", type=int, help="override the Monte-Carlo trial count")
        p.add_argument("--xi", type=int, help="override the series depth")
        p.add_argument("--workers", type=int, help="simulation worker threads")
        group = p.add_mutually_exclusive_group()
        group.add_argument(
            "--traditional", action="store_true", help="equispaced constellation only"
        )
        group.add_argument(
            "--optimized", action="store_true", help="optimized constellation only"
        )
        group.add_argument("--both", action="store_true", help="both schemes")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    experiment = args.verb.replace("-", "_")
    scheme = None
    if args.traditional:
        scheme = "traditional"
    elif args.optimized:
        scheme = "optimized"
    elif args.both:
        scheme = "both"
    overrides = {
        "seed": args.seed,
        "trials": args.trials,
        "xi": args.xi,
        "workers": args.workers,
        "scheme": scheme,
        "output": args.out,
    }
    try:
        raw = load_config(args.config) if args.config else {}
        cfg = resolve_config(raw, experiment, overrides)
        if experiment == "simulate" and cfg["trials"] < 1:
            raise ConfigError("simulate requires trials >= 1 (--trials)")
        return _RUNNERS[experiment](cfg)
    except (ConfigError, OSError) as err:
        print(f"askopt: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
