"""Pipeline configuration: one JSON document, overridable key by key."""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any

from .errors import InvalidConfig

FEATURE_SETS = ("pause_summary", "pause_timeseries", "semantic_grammatical", "semantic_asr")

DEFAULTS: dict[str, Any] = {
    "dataset": "dataset",
    "corpus": None,
    "speaker": None,
    "min_pause": 0.0,
    "include_length_dependent": False,
    "features": {
        "pause_summary": True,
        "pause_timeseries": False,
        "semantic_grammatical": True,
        "semantic_asr": False,
    },
    "coherence": {"strategy": "sequential", "aggregation": "minimum"},
    "embed": {
        "provider": "test",
        "path": None,
        "endpoint": None,
        "model": None,
        "dim": 128,
        "seed": 0,
        "timeout": 30.0,
        "retries": 3,
    },
    "svr": {"C": 1.0, "epsilon": 0.1, "gamma": "scale", "tol": 1e-3, "max_iter": 200_000},
    "cv": {"grouped": None},
    "fusion": {"mode": "late"},
    "aggregate": "none",
    "threshold": {"scale": None, "cutoff": None},
    "importance": {"feature_set": None, "n_repeats": 10, "top": 10},
    "output": "out",
    "seed": 0,
    "workers": 1,
}


def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        where = f"{path}{key}"
        if key not in base:
            raise InvalidConfig(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise InvalidConfig(f"{where!r} must be an object")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def set_key(cfg: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = cfg
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise InvalidConfig(f"unknown config key {dotted!r}")
        node = node[part]
    if parts[-1] not in node:
        raise InvalidConfig(f"unknown config key {dotted!r}")
    node[parts[-1]] = value


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise InvalidConfig(f"{path}: top level must be an object")
        cfg = _merge(cfg, doc)
    for key, value in (overrides or {}).items():
        set_key(cfg, key, value)
    return validate_config(cfg)


def enabled_sets(cfg: dict) -> list[str]:
    return [name for name in FEATURE_SETS if cfg["features"][name]]


def validate_config(cfg: dict) -> dict:
    if cfg["coherence"]["strategy"] not in ("sequential", "static_centroid", "cumulative_centroid"):
        raise InvalidConfig(f"unknown coherence strategy {cfg['coherence']['strategy']!r}")
    if cfg["coherence"]["aggregation"] not in ("minimum", "timeseries"):
        raise InvalidConfig("coherence.aggregation must be 'minimum' or 'timeseries'")
    if cfg["embed"]["provider"] not in ("test", "file", "remote"):
        raise InvalidConfig("embed.provider must be 'test', 'file' or 'remote'")
    if cfg["fusion"]["mode"] not in ("none", "early", "late"):
        raise InvalidConfig("fusion.mode must be 'none', 'early' or 'late'")
    if cfg["aggregate"] not in ("none", "predictions", "features"):
        raise InvalidConfig("aggregate must be 'none', 'predictions' or 'features'")
    if not enabled_sets(cfg):
        raise InvalidConfig("no feature set enabled")
    if cfg["fusion"]["mode"] != "none" and len(enabled_sets(cfg)) < 2:
        raise InvalidConfig(f"fusion.mode={cfg['fusion']['mode']} needs at least two enabled feature sets")
    if cfg["min_pause"] < 0:
        raise InvalidConfig("min_pause must be >= 0")
    svr = cfg["svr"]
    if svr["C"] <= 0 or svr["epsilon"] < 0:
        raise InvalidConfig("svr.C must be > 0 and svr.epsilon >= 0")
    if svr["gamma"] != "scale" and not (isinstance(svr["gamma"], (int, float)) and svr["gamma"] > 0):
        raise InvalidConfig("svr.gamma must be 'scale' or a positive number")
    if int(cfg["workers"]) < 1:
        raise InvalidConfig("workers must be >= 1")
    return cfg


# execution details that cannot change any result; kept out of the provenance echo
# so that output trees compare byte-for-byte across machines and worker counts
RUNTIME_ONLY = ("output", "workers")


def effective_config_json(cfg: dict) -> str:
    doc = {k: v for k, v in cfg.items() if k not in RUNTIME_ONLY}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
