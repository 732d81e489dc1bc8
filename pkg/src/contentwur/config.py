"""JSON run manifests: parsing, validation, defaults and a lossless echo."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .energy import EnergyParams, Protocol
from .harness import ExperimentConfig, expand_grid
from .quadrature import QuadratureConfig
from .system import SystemSpec

BENCHMARK_NAMES = ("system1", "system2")
DEFAULT_POLLS = (1, 2, 5, 10, 20, 50)
DEFAULT_THETAS = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
_INLINE_KEYS = ("A", "H", "Q", "R", "epsilon")


class ConfigError(ValueError):
    """Invalid manifest; ``field`` names the offending key when known."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


@dataclass(frozen=True)
class RunManifest:
    system: str | SystemSpec = "system1"
    n_sensors: int = 50
    episodes: int = 100
    steps: int = 1000
    polls_per_step: tuple[int, ...] = DEFAULT_POLLS
    theta_multipliers: tuple[float, ...] = DEFAULT_THETAS
    protocols: tuple[Protocol, ...] = (Protocol.ID_BASED, Protocol.CONTENT_BASED)
    energy: EnergyParams = field(default_factory=EnergyParams)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    base_seed: int = 0

    def __eq__(self, other):
        return isinstance(other, RunManifest) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))

    def spec(self) -> SystemSpec:
        return self.base_config().spec

    def base_config(self) -> ExperimentConfig:
        return ExperimentConfig(
            system=self.system, n_sensors=self.n_sensors, protocol=self.protocols[0],
            episodes=self.episodes, steps=self.steps, polls_per_step=1,
            theta_multiplier=0.0, energy=self.energy, quad=self.quadrature, base_seed=self.base_seed,
        )

    def grid(self) -> list[ExperimentConfig]:
        """Experiment configurations in manifest order (ID-based points ignore theta)."""
        return expand_grid(self.base_config(), self.protocols, self.polls_per_step, self.theta_multipliers)

    def with_overrides(self, *, base_seed=None, protocols=None, episodes=None, steps=None) -> "RunManifest":
        data = self.to_dict()
        if base_seed is not None:
            data["base_seed"] = base_seed
        if protocols is not None:
            data["protocols"] = [Protocol.parse(p).value for p in protocols]
        if episodes is not None:
            data["episodes"] = episodes
        if steps is not None:
            data["steps"] = steps
        return manifest_from_dict(data)

    def to_dict(self) -> dict:
        if isinstance(self.system, SystemSpec):
            system = {"name": self.system.name, **{k: getattr(self.system, k).tolist() for k in _INLINE_KEYS}}
        else:
            system = self.system
        return {
            "system": system,
            "n_sensors": self.n_sensors,
            "episodes": self.episodes,
            "steps": self.steps,
            "polls_per_step": list(self.polls_per_step),
            "theta_multipliers": list(self.theta_multipliers),
            "protocols": [p.value for p in self.protocols],
            "energy": {f.name: getattr(self.energy, f.name) for f in fields(EnergyParams)},
            "quadrature": {f.name: getattr(self.quadrature, f.name) for f in fields(QuadratureConfig)},
            "base_seed": self.base_seed,
        }


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def _int(data, key, lo=None, hi=None):
    v = data[key]
    if not _is_int(v):
        raise ConfigError(f"expected an integer, got {v!r}", key)
    if lo is not None and v < lo:
        raise ConfigError(f"must be at least {lo}, got {v}", key)
    if hi is not None and v > hi:
        raise ConfigError(f"must be at most {hi}, got {v}", key)
    return v


def _check_keys(data: dict, allowed, where: str | None):
    if not isinstance(data, dict):
        raise ConfigError(f"expected a JSON object, got {type(data).__name__}", where)
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        prefix = f"{where}." if where else ""
        raise ConfigError(f"unknown key(s): {', '.join(prefix + k for k in unknown)}", where)


def _matrix(value, key, ndim):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("must be a numeric array", key) from None
    if arr.ndim != ndim:
        raise ConfigError(f"must be a {ndim}-d array, got shape {arr.shape}", key)
    return arr


def _system(value, n_sensors_given: bool, n_sensors: int):
    if isinstance(value, str):
        if value not in BENCHMARK_NAMES:
            raise ConfigError(f"unknown benchmark {value!r} (expected one of {', '.join(BENCHMARK_NAMES)})", "system")
        return value
    _check_keys(value, (*_INLINE_KEYS, "name"), "system")
    missing = [k for k in _INLINE_KEYS if k not in value]
    if missing:
        raise ConfigError(f"inline system is missing {', '.join(missing)}", "system")
    mats = {k: _matrix(value[k], f"system.{k}", 1 if k == "epsilon" else 2) for k in _INLINE_KEYS}
    name = value.get("name", "custom")
    if not isinstance(name, str):
        raise ConfigError("must be a string", "system.name")
    try:
        spec = SystemSpec(**mats, name=name)
    except ValueError as exc:
        raise ConfigError(str(exc), "system") from None
    if n_sensors_given and spec.n_sensors != n_sensors:
        raise ConfigError(f"inline system has {spec.n_sensors} sensors but n_sensors is {n_sensors}", "n_sensors")
    return spec


def _sub(data, key, cls):
    sub = data.get(key, {})
    names = [f.name for f in fields(cls)]
    _check_keys(sub, names, key)
    for k, v in sub.items():
        if v is None and k == "per_poll_overhead_joules":
            continue
        if not _is_real(v):
            raise ConfigError(f"expected a finite number, got {v!r}", f"{key}.{k}")
    try:
        return cls(**sub)
    except ValueError as exc:
        raise ConfigError(str(exc), key) from None


def manifest_from_dict(data: dict) -> RunManifest:
    """Validate a decoded manifest and fill missing keys with the defaults."""
    allowed = [f.name for f in fields(RunManifest)]
    _check_keys(data, allowed, None)
    d = RunManifest()
    merged = {**d.to_dict(), **{k: v for k, v in data.items() if k not in ("energy", "quadrature")}}

    n_given = "n_sensors" in data
    n_sensors = _int(merged, "n_sensors", lo=1)
    system = _system(merged["system"], n_given, n_sensors)
    if isinstance(system, SystemSpec):
        n_sensors = system.n_sensors
    episodes = _int(merged, "episodes", lo=1)
    steps = _int(merged, "steps", lo=1)
    base_seed = _int(merged, "base_seed", lo=0, hi=2**64 - 1)

    polls = merged["polls_per_step"]
    if not isinstance(polls, list) or not polls or not all(_is_int(m) for m in polls):
        raise ConfigError("expected a non-empty list of integers", "polls_per_step")
    if len(set(polls)) != len(polls):
        raise ConfigError("duplicate values", "polls_per_step")
    for m in polls:
        if m < 1:
            raise ConfigError(f"M must be at least 1, got {m}", "polls_per_step")
        if m > n_sensors:
            raise ConfigError(f"M exceeds N ({m} > {n_sensors})", "polls_per_step")

    thetas = merged["theta_multipliers"]
    if not isinstance(thetas, list) or not thetas or not all(_is_real(c) for c in thetas):
        raise ConfigError("expected a non-empty list of finite numbers", "theta_multipliers")
    if any(c < 0 for c in thetas):
        raise ConfigError("theta multipliers must be non-negative", "theta_multipliers")
    if len(set(thetas)) != len(thetas):
        raise ConfigError("duplicate values", "theta_multipliers")

    protos = merged["protocols"]
    if not isinstance(protos, list) or not protos:
        raise ConfigError("expected a non-empty list", "protocols")
    try:
        protos = tuple(Protocol.parse(p) for p in protos)
    except ValueError as exc:
        raise ConfigError(str(exc), "protocols") from None
    if len(set(protos)) != len(protos):
        raise ConfigError("duplicate values", "protocols")

    manifest = replace(
        d, system=system, n_sensors=n_sensors, episodes=episodes, steps=steps,
        polls_per_step=tuple(polls), theta_multipliers=tuple(float(c) for c in thetas),
        protocols=protos, energy=_sub(data, "energy", EnergyParams),
        quadrature=_sub(data, "quadrature", QuadratureConfig), base_seed=base_seed,
    )
    if Protocol.CONTENT_BASED in protos and not manifest.spec().identity_observation:
        raise ConfigError("content-based polling requires H = I", "system.H")
    return manifest


def parse_config(path: str | Path) -> RunManifest:
    """Read and validate a JSON manifest file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if text.splitlines() else ""
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}\n    {' ' * (exc.colno - 1)}^") from None
    return manifest_from_dict(data)
