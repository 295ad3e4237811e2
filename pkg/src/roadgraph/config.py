"""Run configuration: one JSON file covering every tunable.

The file holds one section per subsystem; every key defaults to the value
hard-coded in that subsystem's config dataclass, and unknown sections or
keys are rejected so typos fail loudly. The ``ROADGRAPH_CONFIG``
environment variable overrides the config path when no explicit path is
given.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .engine import EngineConfig
from .expert import ExpertConfig
from .matching import LossWeights
from .metrics import MetricConfig

CONFIG_ENV_VAR = "ROADGRAPH_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    width: int = 1024
    height: int = 1024
    style: str = "grid"

    def __post_init__(self) -> None:
        if self.width < 256 or self.height < 256:
            raise ConfigError("synth worlds must be at least 256 x 256")
        if self.style not in ("grid", "ring"):
            raise ConfigError(f"unknown synth style {self.style!r}")


@dataclass(frozen=True)
class RunConfig:
    expert: ExpertConfig = field(default_factory=ExpertConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    synth: SynthConfig = field(default_factory=SynthConfig)


_SECTIONS = {
    "expert": ExpertConfig,
    "engine": EngineConfig,
    "metrics": MetricConfig,
    "loss": LossWeights,
    "synth": SynthConfig,
}


def _build_section(name: str, cls, values: dict):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: "
                          f"{', '.join(sorted(unknown))}")
    coerced = {}
    for f in dataclasses.fields(cls):
        if f.name not in values:
            continue
        v = values[f.name]
        if f.name == "deltas":
            v = tuple(float(x) for x in v)
        coerced[f.name] = v
    try:
        return cls(**coerced)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid section {name!r}: {exc}") from exc


def load_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """Load and validate a RunConfig; defaults when no path and no env var."""
    if path is None:
        env = os.environ.get(CONFIG_ENV_VAR)
        if env:
            path = env
    if path is None:
        return RunConfig()
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config root must be a JSON object")
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"{path}: unknown sections: "
                          f"{', '.join(sorted(unknown))}")
    sections = {}
    for name, cls in _SECTIONS.items():
        values = doc.get(name, {})
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: section {name!r} must be an object")
        sections[name] = _build_section(name, cls, values)
    return RunConfig(**sections)


def dump_config(cfg: RunConfig) -> str:
    doc = {name: dataclasses.asdict(getattr(cfg, name))
           for name in _SECTIONS}
    return json.dumps(doc, indent=1, sort_keys=True)
