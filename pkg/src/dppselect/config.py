"""Run configuration: defaults for every knob plus a YAML loader.

An empty or missing file yields the default configuration; unknown keys
are rejected so typos fail loudly instead of silently using defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .errors import InvalidInput
from .student import TrainConfig
from .teacher import TeacherParams


@dataclass(frozen=True)
class AlignSettings:
    """Temperature and mixing weights of the auxiliary objectives."""

    tau: float = 1.0
    lambda_align: float = 1.0
    lambda_distill: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0.0):
            raise InvalidInput("tau must be positive")
        if self.lambda_align < 0.0 or self.lambda_distill < 0.0:
            raise InvalidInput("loss weights must be nonnegative")


@dataclass(frozen=True)
class SelectionSettings:
    """Hard-selection rule used by the select command."""

    rule: str = "topk"
    budget: int = 3
    threshold: float = 0.5

    def __post_init__(self):
        if self.rule not in ("topk", "threshold"):
            raise InvalidInput(f"unknown selection rule {self.rule!r}")
        if int(self.budget) != self.budget or self.budget < 1:
            raise InvalidInput("budget must be a positive integer")
        if not np.isfinite(self.threshold):
            raise InvalidInput("threshold must be finite")


@dataclass(frozen=True)
class Config:
    """Everything the command-line front end needs for one run."""

    teacher: TeacherParams = field(default_factory=TeacherParams)
    train: TrainConfig = field(default_factory=TrainConfig)
    align: AlignSettings = field(default_factory=AlignSettings)
    selection: SelectionSettings = field(default_factory=SelectionSettings)
    pool_cap: int = 5
    relevance_threshold: float = 0.25

    def __post_init__(self):
        if int(self.pool_cap) != self.pool_cap or self.pool_cap < 1:
            raise InvalidInput("pool_cap must be a positive integer")
        if not np.isfinite(self.relevance_threshold):
            raise InvalidInput("relevance_threshold must be finite")


_SECTIONS = {
    "teacher": TeacherParams,
    "train": TrainConfig,
    "align": AlignSettings,
    "selection": SelectionSettings,
}
_SCALARS = ("pool_cap", "relevance_threshold")


def _build_section(cls, data, name: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise InvalidInput(f"section {name!r} must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise InvalidInput(f"unknown keys in section {name!r}: {sorted(unknown)}")
    return cls(**data)


def config_from_mapping(data: Optional[dict]) -> Config:
    """Build a validated Config from a (possibly empty) nested mapping."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise InvalidInput("configuration root must be a mapping")
    unknown = set(data) - set(_SECTIONS) - set(_SCALARS)
    if unknown:
        raise InvalidInput(f"unknown configuration keys: {sorted(unknown)}")
    kwargs = {
        name: _build_section(cls, data.get(name), name)
        for name, cls in _SECTIONS.items()
    }
    for name in _SCALARS:
        if name in data:
            kwargs[name] = data[name]
    return Config(**kwargs)


def load_config(path: Optional[str]) -> Config:
    """Read a YAML configuration file; ``None`` means all defaults."""
    if path is None:
        return Config()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise InvalidInput(f"configuration file not found: {path}")
    except yaml.YAMLError as exc:
        raise InvalidInput(f"could not parse configuration: {exc}")
    return config_from_mapping(data)
