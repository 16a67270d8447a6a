"""Experiment configuration: YAML schema, defaults, validation, resolution.

A resolved config is a plain JSON-serializable dict with every key present,
embedded verbatim in each CSV header so a run can be reproduced from its own
output.  Flag overrides are applied before resolution, so the header always
records the values that actually ran.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np
import yaml

from askopt.channel import ChannelSpec, CorrelationKind, CorrelationModel, los_mean
from askopt.modulation import Side
from askopt.optimizer import GradMode, OptimizerOptions

__all__ = [
    "ConfigError",
    "EXPERIMENTS",
    "load_config",
    "resolve_config",
    "config_to_json",
    "config_from_header",
    "grid_values",
    "channel_spec_from",
    "optimizer_options_from",
]

EXPERIMENTS = ("sep_sweep", "corr_sweep", "optimize", "constellation", "simulate")
SCHEMES = ("traditional", "optimized", "both")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def load_config(path: str) -> dict:
    """Parse a YAML config file into a raw dict (empty file -> {})."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")
    return raw


def _as_float(value: Any, where: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be a number, got {value!r}") from None
    if not np.isfinite(out):
        raise ConfigError(f"{where} must be finite")
    return out


def _as_int(value: Any, where: str) -> int:
    if isinstance(value, bool) or (not isinstance(value, int) and int(value) != value):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return int(value)


def _resolve_grid(spec: Any, where: str, default: dict) -> dict:
    if spec is None:
        spec = default
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be a mapping with start/stop/step")
    out = {
        "start": _as_float(spec.get("start", default["start"]), f"{where}.start"),
        "stop": _as_float(spec.get("stop", default["stop"]), f"{where}.stop"),
        "step": _as_float(spec.get("step", default["step"]), f"{where}.step"),
    }
    unknown = set(spec) - {"start", "stop", "step"}
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    if out["step"] <= 0:
        raise ConfigError(f"{where}.step must be positive")
    if out["stop"] < out["start"]:
        raise ConfigError(f"{where}.stop must be >= start")
    return out


def grid_values(grid: dict) -> list[float]:
    """Expand a resolved start/stop/step grid into its (non-empty) points."""
    start, stop, step = grid["start"], grid["stop"], grid["step"]
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [float(start + k * step) for k in range(count)]


def _resolve_correlation(spec: Any) -> dict:
    if spec is None:
        spec = {"kind": "iid"}
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, dict):
        raise ConfigError("channel.correlation must be a mapping or kind string")
    kind = spec.get("kind", "iid")
    try:
        kind = CorrelationKind(kind).value
    except ValueError:
        raise ConfigError(
            f"channel.correlation.kind must be one of {[k.value for k in CorrelationKind]}"
        ) from None
    eps = spec.get("epsilon")
    if eps is not None:
        eps = _as_float(eps, "channel.correlation.epsilon")
    unknown = set(spec) - {"kind", "epsilon"}
    if unknown:
        raise ConfigError(f"unknown keys in channel.correlation: {sorted(unknown)}")
    return {"kind": kind, "epsilon": eps}


def _resolve_mean(spec: Any, n: int) -> dict:
    if spec is None:
        spec = {"k_av": 1.0}
    if not isinstance(spec, dict):
        raise ConfigError("channel.mean must be a mapping")
    if "values" in spec:
        unknown = set(spec) - {"values"}
        if unknown:
            raise ConfigError(f"channel.mean.values excludes other keys, got {sorted(unknown)}")
        values = spec["values"]
        if not isinstance(values, list) or len(values) != n:
            raise ConfigError(f"channel.mean.values must list {n} [re, im] pairs")
        out = []
        for k, pair in enumerate(values):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError(f"channel.mean.values[{k}] must be an [re, im] pair")
            out.append([_as_float(pair[0], "mean re"), _as_float(pair[1], "mean im")])
        return {"values": out}
    k_av = _as_float(spec.get("k_av", 1.0), "channel.mean.k_av")
    if k_av < 0:
        raise ConfigError("channel.mean.k_av must be nonnegative")
    phases = spec.get("phases")
    if phases is not None:
        if not isinstance(phases, list) or len(phases) != n:
            raise ConfigError(f"channel.mean.phases must list {n} angles")
        phases = [_as_float(p, "channel.mean.phases entry") for p in phases]
    unknown = set(spec) - {"k_av", "phases"}
    if unknown:
        raise ConfigError(f"unknown keys in channel.mean: {sorted(unknown)}")
    return {"k_av": k_av, "phases": phases}


def resolve_config(raw: dict, experiment: str, overrides: dict | None = None) -> dict:
    """Fill defaults, validate, and return the canonical resolved config.

    `overrides` holds CLI flag values (seed/trials/xi/scheme/output) applied
    on top of the file before resolution.
    """
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    raw = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    known = {
        "experiment",
        "channel",
        "modulation",
        "gamma_av_db",
        "sweep",
        "grid",
        "scheme",
        "trials",
        "seed",
        "xi",
        "workers",
        "massive",
        "optimizer",
        "output",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    if "experiment" in raw and raw["experiment"] != experiment:
        raise ConfigError(
            f"config experiment {raw['experiment']!r} does not match verb {experiment!r}"
        )

    channel = raw.get("channel") or {}
    if not isinstance(channel, dict):
        raise ConfigError("channel must be a mapping")
    unknown = set(channel) - {"n", "sigma_h_sq", "sigma_n_sq", "correlation", "mean"}
    if unknown:
        raise ConfigError(f"unknown keys in channel: {sorted(unknown)}")
    n = _as_int(channel.get("n", 4), "channel.n")
    if n < 1:
        raise ConfigError("channel.n must be >= 1")
    sigma_h_sq = _as_float(channel.get("sigma_h_sq", 1.0), "channel.sigma_h_sq")
    sigma_n_sq = _as_float(channel.get("sigma_n_sq", 1.0), "channel.sigma_n_sq")
    if sigma_h_sq <= 0 or sigma_n_sq <= 0:
        raise ConfigError("channel powers must be positive")
    correlation = _resolve_correlation(channel.get("correlation"))

    modulation = raw.get("modulation") or {}
    if not isinstance(modulation, dict):
        raise ConfigError("modulation must be a mapping")
    unknown = set(modulation) - {"side", "m"}
    if unknown:
        raise ConfigError(f"unknown keys in modulation: {sorted(unknown)}")
    try:
        side = Side(modulation.get("side", "one_sided")).value
    except ValueError:
        raise ConfigError(
            f"modulation.side must be one of {[s.value for s in Side]}"
        ) from None
    m = _as_int(modulation.get("m", 4), "modulation.m")
    if m < 1:
        raise ConfigError("modulation.m must be >= 1")
    if side == Side.TWO_SIDED.value and m % 2 != 0:
        raise ConfigError("two-sided modulation requires even m")

    scheme = raw.get("scheme", "traditional")
    if scheme not in SCHEMES:
        raise ConfigError(f"scheme must be one of {SCHEMES}")
    trials = _as_int(raw.get("trials", 0), "trials")
    if trials < 0:
        raise ConfigError("trials must be >= 0")
    seed = _as_int(raw.get("seed", 0), "seed")
    if seed < 0:
        raise ConfigError("seed must be >= 0")
    xi = _as_int(raw.get("xi", 2000), "xi")
    if xi < 1:
        raise ConfigError("xi must be >= 1")
    workers = _as_int(raw.get("workers", 1), "workers")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    massive = raw.get("massive", True)
    if not isinstance(massive, bool):
        raise ConfigError("massive must be a boolean")

    sweep_raw = raw.get("sweep") or {}
    if not isinstance(sweep_raw, dict):
        raise ConfigError("sweep must be a mapping")
    unknown = set(sweep_raw) - {"gamma_av_db", "epsilon"}
    if unknown:
        raise ConfigError(f"unknown keys in sweep: {sorted(unknown)}")
    sweep = {
        "gamma_av_db": _resolve_grid(
            sweep_raw.get("gamma_av_db"),
            "sweep.gamma_av_db",
            {"start": 0.0, "stop": 30.0, "step": 1.0},
        ),
        "epsilon": _resolve_grid(
            sweep_raw.get("epsilon"),
            "sweep.epsilon",
            {"start": 0.05, "stop": 0.9, "step": 0.05},
        ),
    }

    gamma_av_db = _as_float(raw.get("gamma_av_db", 10.0), "gamma_av_db")

    grid_raw = raw.get("grid") or {}
    if not isinstance(grid_raw, dict):
        raise ConfigError("grid must be a mapping")
    unknown = set(grid_raw) - {"n", "gamma_av_db"}
    if unknown:
        raise ConfigError(f"unknown keys in grid: {sorted(unknown)}")
    grid_n = grid_raw.get("n")
    if grid_n is not None:
        if not isinstance(grid_n, list) or not grid_n:
            raise ConfigError("grid.n must be a non-empty list")
        grid_n = [_as_int(v, "grid.n entry") for v in grid_n]
    grid_db = grid_raw.get("gamma_av_db")
    if grid_db is not None:
        if not isinstance(grid_db, list) or not grid_db:
            raise ConfigError("grid.gamma_av_db must be a non-empty list")
        grid_db = [_as_float(v, "grid.gamma_av_db entry") for v in grid_db]
    grid = {"n": grid_n, "gamma_av_db": grid_db}

    opt_raw = raw.get("optimizer") or {}
    if not isinstance(opt_raw, dict):
        raise ConfigError("optimizer must be a mapping")
    opt_defaults = OptimizerOptions()
    unknown = set(opt_raw) - {
        "max_iters",
        "grad_tol",
        "step_init",
        "xi",
        "restarts",
        "min_gap",
        "mode",
        "seed",
        "fd_step",
    }
    if unknown:
        raise ConfigError(f"unknown keys in optimizer: {sorted(unknown)}")
    mode = opt_raw.get("mode", opt_defaults.mode.value)
    try:
        mode = GradMode(mode).value
    except ValueError:
        raise ConfigError(
            f"optimizer.mode must be one of {[g.value for g in GradMode]}"
        ) from None
    min_gap = opt_raw.get("min_gap")
    if min_gap is not None:
        min_gap = _as_float(min_gap, "optimizer.min_gap")
        if min_gap < 0:
            raise ConfigError("optimizer.min_gap must be >= 0")
    optimizer = {
        "max_iters": _as_int(opt_raw.get("max_iters", opt_defaults.max_iters), "optimizer.max_iters"),
        "grad_tol": _as_float(opt_raw.get("grad_tol", opt_defaults.grad_tol), "optimizer.grad_tol"),
        "step_init": _as_float(opt_raw.get("step_init", opt_defaults.step_init), "optimizer.step_init"),
        "xi": _as_int(opt_raw.get("xi", xi), "optimizer.xi"),
        "restarts": _as_int(opt_raw.get("restarts", opt_defaults.restarts), "optimizer.restarts"),
        "min_gap": min_gap,
        "mode": mode,
        "seed": _as_int(opt_raw.get("seed", seed), "optimizer.seed"),
        "fd_step": _as_float(opt_raw.get("fd_step", opt_defaults.fd_step), "optimizer.fd_step"),
    }

    output = raw.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output must be a path string")

    cfg = {
        "experiment": experiment,
        "channel": {
            "n": n,
            "sigma_h_sq": sigma_h_sq,
            "sigma_n_sq": sigma_n_sq,
            "correlation": correlation,
            "mean": _resolve_mean(channel.get("mean"), n),
        },
        "modulation": {"side": side, "m": m},
        "gamma_av_db": gamma_av_db,
        "sweep": sweep,
        "grid": grid,
        "scheme": scheme,
        "trials": trials,
        "seed": seed,
        "xi": xi,
        "workers": workers,
        "massive": massive,
        "optimizer": optimizer,
        "output": output,
    }
    _validate_consistency(cfg)
    return cfg


def _validate_consistency(cfg: dict) -> None:
    corr = cfg["channel"]["correlation"]
    kind = CorrelationKind(corr["kind"])
    if kind is not CorrelationKind.IID and corr["epsilon"] is None:
        raise ConfigError(f"{kind.value} correlation requires channel.correlation.epsilon")
    if kind is CorrelationKind.IID and corr["epsilon"] is not None:
        raise ConfigError("iid correlation takes no epsilon")
    if cfg["experiment"] == "corr_sweep":
        if kind is CorrelationKind.IID:
            raise ConfigError("corr_sweep requires a correlated family (uniform or exponential)")
    else:
        # Build the channel once to surface family/domain errors early.
        try:
            channel_spec_from(cfg)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if cfg["experiment"] == "constellation":
        mean = cfg["channel"]["mean"]
        if cfg["grid"]["n"] is not None and len(cfg["grid"]["n"]) > 0:
            if "values" in mean or mean.get("phases") is not None:
                if cfg["grid"]["n"] != [cfg["channel"]["n"]]:
                    raise ConfigError(
                        "grid.n other than [channel.n] requires a k_av mean without explicit phases"
                    )


def channel_spec_from(cfg: dict, n: int | None = None, epsilon: float | None = None) -> ChannelSpec:
    """Materialize the ChannelSpec, optionally overriding n or epsilon
    (used by the constellation n-grid and the correlation sweep)."""
    ch = cfg["channel"]
    n = int(ch["n"]) if n is None else int(n)
    corr_cfg = ch["correlation"]
    kind = CorrelationKind(corr_cfg["kind"])
    eps = corr_cfg["epsilon"] if epsilon is None else epsilon
    model = CorrelationModel(kind=kind, epsilon=eps)
    mean_cfg = ch["mean"]
    if "values" in mean_cfg:
        if n != ch["n"]:
            raise ConfigError("explicit channel.mean.values fixes n to channel.n")
        mean = np.array([complex(re, im) for re, im in mean_cfg["values"]])
    else:
        phases = mean_cfg.get("phases")
        if phases is not None and len(phases) != n:
            raise ConfigError("channel.mean.phases length must match the antenna count in use")
        mean = los_mean(n, ch["sigma_h_sq"], mean_cfg["k_av"], phases=phases)
    return ChannelSpec(
        n=n,
        sigma_h_sq=ch["sigma_h_sq"],
        sigma_n_sq=ch["sigma_n_sq"],
        correlation=model,
        mean=mean,
    )


def optimizer_options_from(cfg: dict) -> OptimizerOptions:
    opt = cfg["optimizer"]
    return OptimizerOptions(
        max_iters=opt["max_iters"],
        grad_tol=opt["grad_tol"],
        step_init=opt["step_init"],
        xi=opt["xi"],
        restarts=opt["restarts"],
        min_gap=opt["min_gap"],
        mode=GradMode(opt["mode"]),
        seed=opt["seed"],
        fd_step=opt["fd_step"],
    )


def config_to_json(cfg: dict) -> str:
    """Canonical single-line JSON used in CSV headers."""
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_from_header(path: str) -> dict:
    """Recover the resolved config embedded in a CSV header block."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# config: "):
                return json.loads(line[len("# config: ") :])
    raise ConfigError(f"no '# config:' header line found in {path}")
