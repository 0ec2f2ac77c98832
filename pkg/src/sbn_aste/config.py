"""Experiment configuration: defaults, YAML files and ``key=value`` overrides.

Precedence is overrides > file > defaults. Nested encoder settings use a
dotted prefix, e.g. ``encoder.d=64``; the separation loss settings are
``loss.variant`` and ``loss.epsilon``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Mapping

import yaml

from .decoder import GATE_MODES
from .encoder import EncoderConfig
from .separation import SeparationConfig
from .spans import LENGTH_SEMANTICS, POOLING_METHODS


@dataclass(frozen=True)
class TrainConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    loss: SeparationConfig = field(default_factory=SeparationConfig)
    encoder_lr: float = 1e-5
    head_lr: float = 1e-4
    weight_decay: float = 0.01
    batch_size: int = 16
    dropout: float = 0.1
    max_span_length: int = 8
    span_length_semantics: str = "tokens"
    pooling: str = "max"
    epochs: int = 120
    seed: int = 42
    use_a2o: bool = True
    use_o2a: bool = True
    resolve_conflicts: bool = True
    gate: str = "elementwise"
    gate_max: float = 1e4
    selection_metric: str = "dev_triplet_f1"
    deterministic: bool = False

    def __post_init__(self):
        if isinstance(self.encoder, Mapping):
            object.__setattr__(self, "encoder", EncoderConfig(**self.encoder))
        if isinstance(self.loss, Mapping):
            object.__setattr__(self, "loss", SeparationConfig(**self.loss))
        if not (self.encoder_lr > 0 and self.head_lr > 0):
            raise ValueError("learning rates must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be at least 1")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        if self.max_span_length < 1:
            raise ValueError("max_span_length must be at least 1")
        if self.span_length_semantics not in LENGTH_SEMANTICS:
            raise ValueError(f"span_length_semantics must be one of {LENGTH_SEMANTICS}")
        if self.pooling not in POOLING_METHODS:
            raise ValueError(f"pooling must be one of {POOLING_METHODS}")
        if self.gate not in GATE_MODES:
            raise ValueError(f"gate must be one of {GATE_MODES}")
        if not (self.use_a2o or self.use_o2a):
            raise ValueError("at least one decoding direction must be enabled")
        if self.selection_metric != "dev_triplet_f1":
            raise ValueError("the only supported selection metric is dev_triplet_f1")

    def to_dict(self) -> dict:
        return asdict(self)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _coerce(value: Any, current: Any) -> Any:
    """Parse a string override into the type of the field it replaces."""
    if not isinstance(value, str) or isinstance(current, str):
        return value
    parsed = yaml.safe_load(value)
    if isinstance(current, bool):
        if not isinstance(parsed, bool):
            raise ValueError(f"expected a boolean, got {value!r}")
        return parsed
    if isinstance(current, int):
        return int(parsed)
    if isinstance(current, float):
        return float(parsed)
    return parsed


def from_dict(data: Mapping[str, Any], base: TrainConfig | None = None) -> TrainConfig:
    base = base or TrainConfig()
    known = {f.name for f in fields(TrainConfig)}
    top: dict[str, Any] = {}
    nested: dict[str, dict[str, Any]] = {"encoder": {}, "loss": {}}
    for key, value in data.items():
        head, _, rest = key.partition(".")
        if head in nested and (rest or isinstance(value, Mapping)):
            items = {rest: value} if rest else dict(value)
            nested[head].update(items)
        elif key in known:
            top[key] = value
        else:
            raise KeyError(f"unknown configuration key {key!r}")
    for name, sub in nested.items():
        if not sub:
            continue
        current = getattr(base, name)
        sub_known = {f.name for f in fields(current)}
        unknown = set(sub) - sub_known
        if unknown:
            raise KeyError(f"unknown {name} configuration keys {sorted(unknown)}")
        top[name] = replace(current, **{k: _coerce(v, getattr(current, k)) for k, v in sub.items()})
    coerced = {k: v if k in nested else _coerce(v, getattr(base, k)) for k, v in top.items()}
    return replace(base, **coerced)


def load_config(path: str | None = None, overrides: Mapping[str, Any] | None = None) -> TrainConfig:
    config = TrainConfig()
    if path:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, Mapping):
            raise ValueError(f"{path}: configuration must be a mapping")
        config = from_dict(data, config)
    if overrides:
        config = from_dict(overrides, config)
    return config


def dump_config(config: TrainConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)


def parse_overrides(items) -> dict[str, str]:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"override {item!r} is not of the form key=value")
        out[key.strip()] = value.strip()
    return out
