"""Engine configuration: one JSON document with complete defaults."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from .cost import CostParams
from .drf import DrfParams
from .risk import GridDefaults, RiskModel, check_aggregator

ENV_VAR = "RISK_ENGINE_CONFIG"


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


@dataclass(frozen=True)
class WindowConfig:
    T: int = 10
    F: int = 30
    stride: int = 10
    dt: float = 0.1

    def __post_init__(self):
        if min(self.T, self.F, self.stride) < 1:
            raise ValueError("window T, F and stride must be at least 1")
        if not self.dt > 0:
            raise ValueError("window dt must be positive")


@dataclass(frozen=True)
class SsmConfig:
    pet_cell: float = 0.5

    def __post_init__(self):
        if not self.pet_cell > 0:
            raise ValueError("ssm.pet_cell must be positive")


@dataclass(frozen=True)
class EvalConfig:
    k_values: tuple[int, ...] = (10, 20, 50)

    def __post_init__(self):
        ks = tuple(int(k) for k in self.k_values)
        if any(k < 1 for k in ks):
            raise ValueError("eval.k_values must be positive")
        object.__setattr__(self, "k_values", ks)


@dataclass(frozen=True)
class EngineConfig:
    drf: DrfParams = field(default_factory=DrfParams)
    cost: CostParams = field(default_factory=CostParams)
    grid: GridDefaults = field(default_factory=GridDefaults)
    window: WindowConfig = field(default_factory=WindowConfig)
    ssm: SsmConfig = field(default_factory=SsmConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    aggregator: str = "max_max"
    output_dir: str = "out"
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        check_aggregator(self.aggregator)
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @property
    def model(self) -> RiskModel:
        return RiskModel(self.drf, self.cost, self.grid)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _build(cls, data: Mapping[str, Any], path: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path or 'config'} must be a JSON object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        where = f" in {path}" if path else ""
        raise ConfigError(f"unknown config key(s){where}: {', '.join(unknown)}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        current = getattr(defaults, name)
        sub = f"{path}.{name}" if path else name
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value, sub)
        else:
            kwargs[name] = _coerce(current, value, sub)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _coerce(default, value, path: str):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path} must be a string")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{path} must be a list of integers")
        return tuple(value)
    raise ConfigError(f"{path}: unsupported value")


def _set_path(doc: dict, dotted: str, raw: str) -> None:
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted}: {k} is not a section")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings such as aggregator names
    node[keys[-1]] = value


def load_config(path: str | Path | None = None, overrides: Sequence[str] = ()) -> EngineConfig:
    """Defaults, then the JSON file (explicit path or $RISK_ENGINE_CONFIG), then ``key=value`` overrides."""
    path = path or os.environ.get(ENV_VAR) or None
    doc: dict = {}
    if path:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not key=value")
        _set_path(doc, key.strip(), raw.strip())
    return _build(EngineConfig, doc, "")

