"""JSON run configuration: defaults, validation, and assembly of the typed
model objects the library works with."""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

from .datasets import Dataset
from .leafmodels import LeafModelSpec
from .mcmc import ProposalKind
from .model import ModelConfig
from .remc import ReplicaConfig
from .routing import FeatureSpace


class ConfigError(ValueError):
    pass


DEFAULTS: dict = {
    "d_max": 10,
    "split_prior_g": 0.75,
    "leaf_model": {"family": "bernoulli_beta", "alpha": 0.5, "beta": 0.5},
    "proposal": {"kind": "posterior_truncated", "g_bar": "auto", "alpha": "auto"},
    "burn_in": 500,
    "t_end": 1000,
    "loss": "zero_one",
    "seed": 0,
    "replicas": {
        "enabled": False,
        "count": 8,
        "betas": "linear",
        "exchange_period": 10,
        "attempts_per_period": 4,
    },
    "initial_ranges": None,
    "data": {"target": None, "continuous": [], "categorical": [], "binary": [], "ignore": []},
    "synth": {
        "p": 0, "q": 20, "d_max": None, "split_prior_g": None,
        "n_train": 200, "n_test": 100, "model_seed": 0, "data_seed": 0,
    },
    "convergence": {
        "q": 5, "d_max": 3, "split_prior_g": 0.5, "n": 100, "n_datasets": 10,
        "burn_in": 500, "accept_target": 1000, "g_bar": 0.75,
        "kinds": ["posterior_truncated", "uniform"], "true_model": "A",
        "enumeration_cap": 1_000_000,
    },
    "compare": {
        "q": 5, "d_max": 3, "split_prior_g": 0.5, "n": 100,
        "burn_in": 500, "t_end": 3000, "models": ["A", "B", "C"],
        "g_bar": 0.75, "alpha": 0.8,
        "kinds": ["uniform", "prior_tree", "posterior_truncated", "posterior_amplified"],
    },
}


def _deep_merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _deep_merge(base[key], value, path=f"{path}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | os.PathLike | None, overrides: dict | None = None) -> dict:
    """Defaults, overlaid with the JSON file, overlaid with CLI overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        raw = Path(path).read_text()
        try:
            user = json.loads(raw)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config {path} is not valid JSON: {err}") from err
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        cfg = _deep_merge(cfg, user)
    if overrides:
        cfg = _deep_merge(cfg, overrides)
    return cfg


def dump_effective(cfg: dict, out_path: str | os.PathLike) -> None:
    Path(out_path).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def leaf_spec_from(cfg: dict) -> LeafModelSpec:
    section = dict(cfg["leaf_model"])
    family = section.pop("family", None)
    if not family:
        raise ConfigError("leaf_model.family is required")
    return LeafModelSpec(family, section)


def proposal_kind_from(section: dict) -> ProposalKind:
    kind = section.get("kind", "posterior_truncated")
    if kind in ("uniform", "prior_tree"):
        return ProposalKind(kind)
    param_key = "g_bar" if kind == "posterior_truncated" else "alpha"
    raw = section.get(param_key, "auto")
    param = None if raw in (None, "auto") else float(raw)
    try:
        return ProposalKind(kind, param)
    except ValueError as err:
        raise ConfigError(str(err)) from err


def replica_config_from(cfg: dict) -> ReplicaConfig | None:
    section = cfg["replicas"]
    if not section.get("enabled", False):
        return None
    betas = section.get("betas", "linear")
    if betas == "linear":
        return ReplicaConfig.linear(
            int(section["count"]),
            exchange_period=int(section["exchange_period"]),
            attempts_per_period=int(section["attempts_per_period"]),
        )
    return ReplicaConfig(
        betas=tuple(float(b) for b in betas),
        exchange_period=int(section["exchange_period"]),
        attempts_per_period=int(section["attempts_per_period"]),
    )


def _range_overrides(cfg: dict, ds: Dataset) -> dict[int, tuple[float, float]]:
    section = cfg.get("initial_ranges")
    if not section:
        return {}
    out: dict[int, tuple[float, float]] = {}
    for key, pair in section.items():
        if isinstance(key, str) and key in ds.feature_names:
            idx = ds.feature_names.index(key)
        else:
            try:
                idx = int(key)
            except (TypeError, ValueError):
                raise ConfigError(f"initial_ranges key {key!r} is neither a feature "
                                  "name nor an index") from None
        out[idx] = (float(pair[0]), float(pair[1]))
    return out


def model_from_dataset(cfg: dict, ds: Dataset) -> ModelConfig:
    """Tree shape from the config, feature ranges from the training data
    (plus explicit overrides, which are echoed with the effective config)."""
    space = FeatureSpace.from_data(ds.X, ds.p, ds.q, overrides=_range_overrides(cfg, ds))
    try:
        return ModelConfig.create(int(cfg["d_max"]), cfg["split_prior_g"], space,
                                  leaf_spec_from(cfg))
    except ValueError as err:
        raise ConfigError(str(err)) from err


def default_threads() -> int:
    raw = os.environ.get("MTMCMC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
