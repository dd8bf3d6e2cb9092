"""Flat key-value overrides for ``--config`` files.

A config file is a JSON object whose keys name fields of the per-module
config dataclasses, optionally prefixed with the section::

    {"lai_threshold": 20, "metrics.pnorm_divisor": "mean", "mosse.learning_rate": 0.2}

Tracker constants use ``<tracker>.<option>`` keys.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .attributes import AttributeConfig
from .dataset import ValidationConfig
from .metrics import MetricConfig
from .trackers import TRACKERS


class ConfigError(ValueError):
    pass


@dataclass
class BenchConfig:
    attributes: AttributeConfig = field(default_factory=AttributeConfig)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    validation: ValidationConfig = field(default_factory=ValidationConfig)
    tracker_options: dict[str, dict] = field(default_factory=dict)

    def options_for(self, tracker: str) -> dict:
        return dict(self.tracker_options.get(tracker, {}))


_SECTIONS = ("attributes", "metrics", "validation")


def apply_overrides(cfg: BenchConfig, flat: dict) -> BenchConfig:
    for key, value in flat.items():
        section, _, name = key.rpartition(".")
        if section in TRACKERS:
            cfg.tracker_options.setdefault(section, {})[name] = value
            continue
        targets = [section] if section else _SECTIONS
        hit = False
        for sec in targets:
            if sec not in _SECTIONS:
                raise ConfigError(f"unknown config section {sec!r} in key {key!r}")
            obj = getattr(cfg, sec)
            if name in {f.name for f in dataclasses.fields(obj)}:
                setattr(obj, name, value)
                hit = True
        if not hit:
            raise ConfigError(f"unknown config key {key!r}")
    return cfg


def load_config(path: str | Path | None) -> BenchConfig:
    cfg = BenchConfig()
    if path is None:
        return cfg
    try:
        with open(path) as fh:
            flat = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(flat, dict) or any(isinstance(v, (dict, list)) for v in flat.values()):
        raise ConfigError("config must be a flat JSON object of scalar values")
    return apply_overrides(cfg, flat)
