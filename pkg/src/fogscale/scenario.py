"""Scenario files: a flat YAML mapping whose keys default to the reference setup.

A run manifest written by :func:`fogscale.harness.emit_results` is also a
valid scenario file; its ``scenario`` section is used.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from fogscale.analytics import ArrivalProfile, ClassMix, ParameterError, net_arrival_rate
from fogscale.controller import ScalingPolicy


class ScenarioError(ValueError):
    """A scenario file could not be parsed or failed validation."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.line = line


@dataclass(frozen=True)
class ValidationPoint:
    arrival_rate: float
    servers: int
    alpha: float = 0.2
    beta: float = 0.1
    sct_in_class1: bool = False
    service_rate: float = 1.0

    @property
    def mix(self) -> ClassMix:
        return ClassMix(self.alpha, self.beta, self.sct_in_class1)


# Ten stable points: the two worked configurations plus the upper half of the
# load range at node counts the controller actually picks.
DEFAULT_VALIDATION_GRID: tuple[ValidationPoint, ...] = (
    ValidationPoint(1.0, 2, alpha=0.2, beta=0.0),
    ValidationPoint(2.0, 3),
    ValidationPoint(5.0, 7, sct_in_class1=True),
    ValidationPoint(8.0, 15),
    ValidationPoint(10.0, 15, sct_in_class1=True),
    ValidationPoint(11.0, 16, sct_in_class1=True),
    ValidationPoint(12.0, 17),
    ValidationPoint(13.0, 18, sct_in_class1=True),
    ValidationPoint(14.0, 18),
    ValidationPoint(14.0, 20, sct_in_class1=True),
)


@dataclass(frozen=True)
class Scenario:
    mu: float = 1.0
    alpha: float = 0.2
    beta: float = 0.1
    m_init: int = 18
    m_max: int = 20
    m_min: int = 15
    pool_size: int | None = None
    w1_threshold: float = 0.01
    w_sct_threshold: float = 0.02
    lambda_min: float = 1.0
    lambda_max: float = 14.0
    lambda_step: float = 1.0
    carry_state: bool = True
    device_rates: tuple[float, ...] | None = None
    cloud_offload_rate: float = 0.0
    seed: int = 42
    replications: int = 20
    horizon: int = 55_556
    warmup_fraction: float = 0.1
    rel_tolerance: float = 0.05
    se_tolerance: float = 3.0
    validation_grid: tuple[ValidationPoint, ...] = field(default=DEFAULT_VALIDATION_GRID)

    def __post_init__(self):
        self.mix
        self.policy
        if not self.mu > 0:
            raise ParameterError("mu must be positive")
        if self.m_init < 1:
            raise ParameterError("m_init must be positive")
        if not (0 < self.lambda_min <= self.lambda_max and self.lambda_step > 0):
            raise ParameterError("need 0 < lambda_min <= lambda_max and lambda_step > 0")
        if self.replications < 2:
            raise ParameterError("replications must be at least 2")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be an unsigned 64-bit integer")
        if self.rel_tolerance < 0 or self.se_tolerance < 0:
            raise ParameterError("tolerances must be non-negative")
        if self.device_rates is not None:
            net_arrival_rate(self.arrival_profile)

    @property
    def mix(self) -> ClassMix:
        return ClassMix(self.alpha, self.beta)

    @property
    def policy(self) -> ScalingPolicy:
        return ScalingPolicy(self.m_min, self.m_max, self.w1_threshold, self.w_sct_threshold, self.pool_size)

    @property
    def arrival_profile(self) -> ArrivalProfile | None:
        if self.device_rates is None:
            return None
        return ArrivalProfile(self.device_rates, self.cloud_offload_rate)

    @property
    def lambda_grid(self) -> list[float]:
        return lambda_grid(self.lambda_min, self.lambda_max, self.lambda_step)

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "validation_grid":
                value = [dataclasses.asdict(p) for p in value]
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


def lambda_grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive arithmetic grid, robust to floating accumulation."""
    if step <= 0 or stop < start:
        raise ParameterError(f"bad grid {start}:{stop}:{step}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def parse_grid(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ParameterError(f"lambda grid must look like start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    lambda_grid(start, stop, step)
    return start, stop, step


_FIELDS = {f.name: f for f in dataclasses.fields(Scenario)}
_INT_KEYS = {"m_init", "m_max", "m_min", "pool_size", "seed", "replications", "horizon"}
_BOOL_KEYS = {"carry_state"}


def _coerce(key: str, value: Any) -> Any:
    if value is None:
        if key in ("pool_size", "device_rates"):
            return None
        raise ParameterError(f"{key} may not be empty")
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ParameterError(f"{key} must be true or false")
        return value
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParameterError(f"{key} must be an integer")
        return value
    if key == "device_rates":
        if not isinstance(value, list):
            raise ParameterError("device_rates must be a list of rates")
        return tuple(float(v) for v in value)
    if key == "validation_grid":
        if not isinstance(value, list) or not value:
            raise ParameterError("validation_grid must be a non-empty list")
        points = []
        for item in value:
            if not isinstance(item, dict):
                raise ParameterError("validation_grid entries must be mappings")
            try:
                points.append(ValidationPoint(**item))
            except TypeError as exc:
                raise ParameterError(f"bad validation point {item}: {exc}") from None
        return tuple(points)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParameterError(f"{key} must be a number")
    return float(value)


def scenario_from_mapping(data: dict[str, Any], key_lines: dict[str, int] | None = None,
                          source: str | None = None) -> Scenario:
    key_lines = key_lines or {}
    kwargs = {}
    for key, value in data.items():
        if key not in _FIELDS:
            raise ScenarioError(f"unknown key {key!r}", key_lines.get(key), source)
        try:
            kwargs[key] = _coerce(key, value)
        except (ParameterError, ValueError, TypeError) as exc:
            raise ScenarioError(str(exc), key_lines.get(key), source) from None
    try:
        return Scenario(**kwargs)
    except ParameterError as exc:
        raise ScenarioError(str(exc), None, source) from None


def _key_lines(node: yaml.Node) -> dict[str, int]:
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {k.value: k.start_mark.line + 1 for k, _ in node.value if isinstance(k, yaml.ScalarNode)}


def loads_scenario(text: str, source: str | None = None) -> Scenario:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ScenarioError(f"cannot parse: {exc.problem}", line, source) from None
    if data is None:
        return Scenario()
    if not isinstance(data, dict):
        raise ScenarioError("top level must be a mapping of keys to values", 1, source)
    if "manifest_version" in data:
        section = data.get("scenario")
        if not isinstance(section, dict):
            raise ScenarioError("manifest has no scenario section", None, source)
        inner = next(v for k, v in node.value if k.value == "scenario")
        return scenario_from_mapping(section, _key_lines(inner), source)
    return scenario_from_mapping(data, _key_lines(node), source)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return loads_scenario(path.read_text(encoding="utf-8"), str(path))
