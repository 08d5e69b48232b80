"""Strict JSON config files mirroring :class:`daisymimo.harness.ExperimentSpec`.

Keys map one-to-one onto the spec fields; unknown keys anywhere are errors so
typos fail loudly instead of silently running a different experiment.
"""

from __future__ import annotations

import json

from .chain_sim import PowerSavePolicy, TopologyConfig
from .harness import AlgorithmSpec, ExperimentSpec
from .interconnect import TABLE_SCENARIOS, FrameConfig, RateScenario

__all__ = ["ConfigError", "load_spec", "spec_from_dict"]


class ConfigError(ValueError):
    """Malformed experiment config."""


def _require_mapping(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be an object, got {type(value).__name__}")
    return value


def _build(factory, where: str, /, *args, **kwargs):
    """Construct a spec object, reporting validation failures as config errors."""
    try:
        return factory(*args, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _check_keys(data: dict, allowed, where: str) -> None:
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _topology(data) -> TopologyConfig:
    data = _require_mapping(data, "topology")
    _check_keys(data, {"m", "k", "c", "b"}, "topology")
    missing = {"m", "k"} - set(data)
    if missing:
        raise ConfigError(f"topology is missing key(s): {', '.join(sorted(missing))}")
    m, k = int(data["m"]), int(data["k"])
    if "c" in data:
        c = int(data["c"])
        if "b" in data and int(data["b"]) * c != m:
            raise ConfigError(f"topology has M={m} but C*B={c * int(data['b'])}")
        return _build(TopologyConfig.from_clusters, "topology", m, k, c)
    return _build(TopologyConfig, "topology", m_antennas=m, k_users=k, c_clusters=1, b_per_cluster=m)


def _frame(data) -> FrameConfig:
    data = _require_mapping(data, "frame")
    allowed = {"t_slot", "n_slot", "n_ul", "n_u", "s_cb", "w_s", "w_gamma", "w_sc"}
    _check_keys(data, allowed, "frame")
    return _build(FrameConfig, "frame", **data)


def _algorithm(data, index: int) -> AlgorithmSpec:
    where = f"algorithms[{index}]"
    data = _require_mapping(data, where)
    _check_keys(data, {"name", "mu", "n0"}, where)
    if "name" not in data:
        raise ConfigError(f"{where} is missing 'name'")
    return _build(AlgorithmSpec, where, name=data["name"], mu=data.get("mu"), n0=data.get("n0"))


def _power_save(data) -> PowerSavePolicy:
    data = _require_mapping(data, "power_save")
    _check_keys(data, {"policy", "threshold"}, "power_save")
    if "policy" not in data or "threshold" not in data:
        raise ConfigError("power_save needs both 'policy' and 'threshold'")
    threshold = data["threshold"]
    if threshold == "inf":
        threshold = float("inf")
    return _build(PowerSavePolicy, "power_save", mode=data["policy"], threshold=float(threshold))


def _scenario(data, index: int) -> RateScenario:
    where = f"scenarios[{index}]"
    data = _require_mapping(data, where)
    _check_keys(data, {"m", "k", "c", "b", "n_iter"}, where)
    missing = {"m", "k", "c", "b"} - set(data)
    if missing:
        raise ConfigError(f"{where} is missing key(s): {', '.join(sorted(missing))}")
    return _build(
        RateScenario, where,
        m=int(data["m"]), k=int(data["k"]), c=int(data["c"]), b=int(data["b"]),
        n_iter=int(data.get("n_iter", 3)),
    )


_TOP_LEVEL_KEYS = {
    "kind", "topology", "frame", "algorithms", "snr_db", "snr_db_grid",
    "constellation_order", "trials", "master_seed", "s0_mode", "re_count",
    "target_errors", "max_trials_per_point", "power_save", "re_ticks",
    "prep_ticks", "scenarios",
}


def spec_from_dict(data: dict) -> ExperimentSpec:
    data = _require_mapping(data, "config")
    _check_keys(data, _TOP_LEVEL_KEYS, "config")
    if "kind" not in data:
        raise ConfigError("config is missing 'kind'")
    kwargs = {"kind": data["kind"]}
    if "topology" in data:
        kwargs["topology"] = _topology(data["topology"])
    if "frame" in data:
        kwargs["frame"] = _frame(data["frame"])
    if "algorithms" in data:
        if not isinstance(data["algorithms"], list):
            raise ConfigError("algorithms must be a list")
        kwargs["algorithms"] = tuple(_algorithm(a, i) for i, a in enumerate(data["algorithms"]))
    if "power_save" in data:
        kwargs["power_save"] = _power_save(data["power_save"])
    if "scenarios" in data:
        if not isinstance(data["scenarios"], list):
            raise ConfigError("scenarios must be a list")
        kwargs["scenarios"] = tuple(_scenario(s, i) for i, s in enumerate(data["scenarios"]))
    if "snr_db_grid" in data:
        kwargs["snr_db_grid"] = tuple(float(v) for v in data["snr_db_grid"])
    for key in (
        "snr_db", "constellation_order", "trials", "master_seed", "s0_mode",
        "re_count", "target_errors", "max_trials_per_point", "re_ticks", "prep_ticks",
    ):
        if key in data:
            kwargs[key] = data[key]
    try:
        return ExperimentSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_spec(path) -> ExperimentSpec:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return spec_from_dict(data)
