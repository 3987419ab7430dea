"""Experiment configuration: a flat ``key: value`` YAML file.

Unknown keys are rejected so a typo cannot silently fall back to a default.

Keys (defaults in brackets)::

    power_P                 transmitter power in W [20]
    lambda                  price weight, or a list for welfare sweeps [1]
    demand_rate_range       [lo, hi] for C_i/D_i in W [[1, 3]]
    efficiency_range        [lo, hi] for h_i [[0.11, 0.19]]
    user_count              M, or a list of M values [experiment-specific]
    delivery_prob           link success probability, scalar or MxM matrix
                            [1.0; 0.8 for the asynchronous experiments]
    update_prob             per-round update probability [1.0]
    seed                    master seed [0]
    trials                  instances per averaged point [1000]
    tolerance               sup-norm step tolerance [1e-9]
    max_iterations          iteration / round cap [10000]
    init                    half_k | constant:<c> | random:<lo>:<hi> [half_k]
    starts                  list of init specs for convergence runs
                            [[half_k, "constant:1e-6", "constant:1"]]
    symmetric               use identical users in sweeps [false]
    symmetric_rate          C/D for identical users [1.2]
    symmetric_efficiency    h for identical users [0.15]
"""

from __future__ import annotations

import functools
import hashlib
import json
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .dynamics import Constant, HalfK, InitMode, RandomUniform, SolverSettings


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    power_P: float = 20.0
    lambda_: float | list[float] = 1.0
    demand_rate_range: tuple[float, float] = (1.0, 3.0)
    efficiency_range: tuple[float, float] = (0.11, 0.19)
    user_count: int | list[int] | None = None
    delivery_prob: float | list[list[float]] | None = None
    update_prob: float = 1.0
    seed: int = 0
    trials: int = 1000
    tolerance: float = 1e-9
    max_iterations: int = 10_000
    init: str = "half_k"
    starts: tuple[str, ...] = ("half_k", "constant:1e-6", "constant:1")
    symmetric: bool = False
    symmetric_rate: float = 1.2
    symmetric_efficiency: float = 0.15

    def __post_init__(self):
        object.__setattr__(self, "demand_rate_range", _range(self.demand_rate_range, "demand_rate_range", 0, None))
        object.__setattr__(self, "efficiency_range", _range(self.efficiency_range, "efficiency_range", 0, 1))
        object.__setattr__(self, "starts", tuple(self.starts))
        if not self.power_P > 0:
            raise ConfigError("power_P must be positive")
        lams = self.lambda_ if isinstance(self.lambda_, list) else [self.lambda_]
        if not lams or any(not (isinstance(v, (int, float)) and v > 0) for v in lams):
            raise ConfigError("lambda must be a positive number or a non-empty list of them")
        for m in self.user_counts(2):
            if not (isinstance(m, int) and m >= 2):
                raise ConfigError(f"user_count entries must be integers >= 2, got {m!r}")
        if not 0 < self.update_prob <= 1:
            raise ConfigError("update_prob must lie in (0, 1]")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.tolerance > 0 or self.max_iterations < 1:
            raise ConfigError("tolerance must be > 0 and max_iterations >= 1")
        if not (self.symmetric_rate > 0 and 0 < self.symmetric_efficiency <= 1):
            raise ConfigError("symmetric_rate must be > 0 and symmetric_efficiency in (0, 1]")
        for spec in (self.init, *self.starts):
            parse_init(spec)
        if isinstance(self.delivery_prob, (int, float)) and not 0 < self.delivery_prob <= 1:
            raise ConfigError("delivery_prob must lie in (0, 1]")

    @property
    def lambdas(self) -> list[float]:
        return [float(v) for v in (self.lambda_ if isinstance(self.lambda_, list) else [self.lambda_])]

    def user_counts(self, default: int | list[int]) -> list[int]:
        value = default if self.user_count is None else self.user_count
        return list(value) if isinstance(value, (list, tuple)) else [value]

    def solver(self, init: str | None = None) -> SolverSettings:
        return SolverSettings(self.tolerance, self.max_iterations, parse_init(init or self.init))

    def to_dict(self) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["lambda"] = d.pop("lambda_")
        return json.loads(json.dumps(d))

    @functools.cached_property
    def _hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def config_hash(self) -> str:
        return self._hash

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))


_KEYS = ({f.name for f in fields(ExperimentConfig)} - {"lambda_"}) | {"lambda"}


def _range(value, name, lo, hi) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a pair [lo, hi]") from None
    if a > b or a <= lo or (hi is not None and b > hi):
        raise ConfigError(f"{name} = [{a}, {b}] is empty or out of bounds")
    return a, b


def parse_init(spec: str) -> InitMode:
    """``half_k``, ``constant:<c>`` or ``random:<lo>:<hi>[:<seed>]``."""
    parts = str(spec).split(":")
    try:
        if parts[0] == "half_k" and len(parts) == 1:
            return HalfK()
        if parts[0] == "constant" and len(parts) == 2:
            return Constant(float(parts[1]))
        if parts[0] == "random" and len(parts) in (3, 4):
            seed = int(parts[3]) if len(parts) == 4 else 0
            return RandomUniform(float(parts[1]), float(parts[2]), seed)
    except ValueError as exc:
        raise ConfigError(f"bad init spec {spec!r}: {exc}") from None
    raise ConfigError(f"bad init spec {spec!r}")


_FLOAT_KEYS = {"power_P", "update_prob", "tolerance", "symmetric_rate", "symmetric_efficiency"}
_INT_KEYS = {"seed", "trials", "max_iterations"}


def _number(value, cast, key):
    # YAML 1.1 reads exponent literals such as 1e-9 as strings
    if isinstance(value, bool):
        raise ConfigError(f"{key} must be numeric, got {value!r}")
    if isinstance(value, list):
        return [_number(v, cast, key) for v in value]
    try:
        out = cast(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be numeric, got {value!r}") from None
    if cast is int and out != float(value):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return out


def config_from_mapping(data: dict[str, Any] | None) -> ExperimentConfig:
    data = dict(data or {})
    unknown = set(data) - _KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigError(f"config must be flat; {key!r} is a mapping")
    for key in _FLOAT_KEYS & set(data):
        data[key] = _number(data[key], float, key)
    for key in _INT_KEYS & set(data):
        data[key] = _number(data[key], int, key)
    for key in ("lambda", "delivery_prob", "demand_rate_range", "efficiency_range"):
        if key in data and data[key] is not None:
            data[key] = _number(data[key], float, key)
    if data.get("user_count") is not None:
        data["user_count"] = _number(data["user_count"], int, "user_count")
    if "lambda" in data:
        data["lambda_"] = data.pop("lambda")
    if "starts" in data and not isinstance(data["starts"], list):
        raise ConfigError("starts must be a list")
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config file must be a flat key: value mapping")
    return config_from_mapping(data)
