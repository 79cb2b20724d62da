"""Run configuration: defaults, file loading, overrides, provenance echo.

One YAML document (all sections optional) configures a run. Unknown keys
are rejected with their dotted path, label ratios written as percents are
normalized to fractions, and every command echoes the fully materialized
configuration next to its outputs so a run can be reproduced from the
echo alone.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, fields

import yaml

from .errors import ConfigError
from .evalbench import SyntheticSpec
from .trainer import TrainConfig

DEFAULTS: dict = {
    "seed": 0,
    "metapaths": [["P", "A", "P"], ["P", "S", "P"]],
    "train": {
        "learning_rate": 2e-3,
        "patience": 20,
        "max_epochs": 100,
        "dropout": 0.1,
        "temperature": 0.5,
        "lambda_co": 1.0,
        "lambda_kl": 0.1,
        "num_clusters": 3,
        "hidden_dim": 64,
        "embed_dim": 64,
        "conv_depth": 2,
        "feature_mask_rate": 0.1,
        "hyperedge_drop_rate": 0.1,
        "refresh_period": 5,
        "train_ratio": 0.2,
        "val_fraction": 0.1,
        "weighting": "unit",
        "positives": "self",
        "positives_topk": 0,
        "probe_epochs": 300,
    },
    "synth": {
        "num_classes": 3,
        "anchors_per_class": 100,
        "aux_a": 40,
        "aux_s": 40,
        "p_in": 0.2,
        "p_out": 0.02,
        "feature_dim": 32,
        "noise_std": 0.5,
        "class_sep": 0.3,
    },
    "eval": {
        "ratios": [20, 40, 60],
        "seeds": 1,
        "model": "ours",
    },
}


@dataclass
class RunConfig:
    seed: int
    metapaths: list[list[str]]
    train: TrainConfig
    synth: SyntheticSpec
    eval_ratios: list[int]
    eval_seeds: int
    model_name: str


def _merge(defaults, supplied, path: str):
    """Overlay supplied values on defaults, rejecting unknown keys."""
    if not isinstance(supplied, dict):
        raise ConfigError(f"section {path or '<root>'} must be a mapping")
    merged = copy.deepcopy(defaults)
    for key, value in supplied.items():
        dotted = f"{path}.{key}" if path else str(key)
        if key not in defaults:
            raise ConfigError(f"unknown configuration key {dotted}")
        if isinstance(defaults[key], dict):
            merged[key] = _merge(defaults[key], value, dotted)
        else:
            merged[key] = value
    return merged


def _normalize_ratio(value, dotted: str) -> float:
    """Fractions pass through; percent-style values (>1) are divided by 100."""
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{dotted} must be a number, got {value!r}") from None
    if value > 1.0:
        value /= 100.0
    return value


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Materialize a RunConfig from defaults, an optional file, and flags.

    Precedence: flag overrides (dotted keys) > file values > defaults.
    All TrainConfig/SyntheticSpec invariants are enforced here.
    """
    supplied: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path} must contain a mapping at top level")
        supplied = loaded
    raw = _merge(DEFAULTS, supplied, "")

    for dotted, value in (overrides or {}).items():
        parts = dotted.split(".")
        node = raw
        for i, part in enumerate(parts[:-1]):
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"unknown configuration key {dotted}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown configuration key {dotted}")
        node[parts[-1]] = value

    seed = raw["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")

    metapaths = raw["metapaths"]
    if not isinstance(metapaths, list) or not metapaths:
        raise ConfigError("metapaths must be a non-empty list of type sequences")
    for i, mp in enumerate(metapaths):
        if not isinstance(mp, list) or not all(isinstance(t, str) for t in mp):
            raise ConfigError(f"metapaths[{i}] must be a list of type names")

    train_raw = dict(raw["train"])
    train_raw["train_ratio"] = _normalize_ratio(
        train_raw["train_ratio"], "train.train_ratio"
    )
    train_raw["val_fraction"] = _normalize_ratio(
        train_raw["val_fraction"], "train.val_fraction"
    )
    try:
        train = TrainConfig(seed=seed, **train_raw).validate()
    except TypeError as err:
        raise ConfigError(f"bad train section: {err}") from None

    try:
        synth = SyntheticSpec(seed=seed, **raw["synth"])
    except TypeError as err:
        raise ConfigError(f"bad synth section: {err}") from None

    eval_raw = raw["eval"]
    ratios = eval_raw["ratios"]
    if not isinstance(ratios, list) or not ratios:
        raise ConfigError("eval.ratios must be a non-empty list")
    norm_ratios = []
    for r in ratios:
        frac = _normalize_ratio(r, "eval.ratios")
        if not 0.0 < frac < 1.0:
            raise ConfigError(f"eval.ratios entry {r!r} outside (0, 100)")
        norm_ratios.append(int(round(frac * 100)))
    seeds = eval_raw["seeds"]
    if not isinstance(seeds, int) or seeds < 1:
        raise ConfigError(f"eval.seeds must be a positive integer, got {seeds!r}")
    model = str(eval_raw["model"])

    return RunConfig(
        seed=seed,
        metapaths=[list(mp) for mp in metapaths],
        train=train,
        synth=synth,
        eval_ratios=norm_ratios,
        eval_seeds=seeds,
        model_name=model,
    )


def effective_config(rc: RunConfig) -> dict:
    """The fully materialized configuration document for provenance echo."""
    train = {
        f.name: getattr(rc.train, f.name)
        for f in fields(TrainConfig)
        if f.name != "seed"
    }
    synth = {
        f.name: getattr(rc.synth, f.name)
        for f in fields(SyntheticSpec)
        if f.name != "seed"
    }
    return {
        "seed": rc.seed,
        "metapaths": [list(mp) for mp in rc.metapaths],
        "train": train,
        "synth": synth,
        "eval": {
            "ratios": list(rc.eval_ratios),
            "seeds": rc.eval_seeds,
            "model": rc.model_name,
        },
    }


def dump_config(rc: RunConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(effective_config(rc), fh, sort_keys=True)
