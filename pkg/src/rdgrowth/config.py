"""Experiment configuration: a YAML file with a flat primitives section plus
optional policy, planner, oracle and sweep sections."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .policyspec import parse_targets
from .primitives import ConfigError, Primitives, primitives_from_mapping


@dataclass(frozen=True)
class PolicyConfig:
    targets: str = "basic"
    budget_share: float = 0.01


@dataclass(frozen=True)
class PlannerConfig:
    n_starts: int = 8
    max_evals: int = 2000
    xatol: float = 1e-4
    subsidy_targets: str = "basic"
    subsidy_budget: float = 0.01


@dataclass(frozen=True)
class OracleConfig:
    n_lines: int = 100_000
    horizon: float = 200.0
    dt: float = 0.01
    step_rule: str = "pooled"
    share_tol_pp: float = 2.0
    ks_tol: float = 0.03
    growth_rel_tol: float = 0.15


@dataclass(frozen=True)
class SweepConfig:
    budgets: tuple = (0.0, 0.0025, 0.005, 0.01)
    targets: tuple = ("all", "applied", "basic")


@dataclass(frozen=True)
class ExperimentSpec:
    name: str = "baseline"
    primitives: Primitives = field(default_factory=Primitives)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    spillover_varsigma: float = 20.0   # spillover weight of the extension table
    seed: int = 0
    tolerance: float = 1e-10

    def canonical(self) -> dict:
        d = asdict(self)
        d["sweep"] = {k: list(v) for k, v in d["sweep"].items()}
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_SECTIONS = {"policy": PolicyConfig, "planner": PlannerConfig, "oracle": OracleConfig,
             "sweep": SweepConfig}


def _section(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected a mapping")
    known = cls.__dataclass_fields__
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown key")
        default = known[key].default
        try:
            if isinstance(default, tuple):
                if not isinstance(value, (list, tuple)):
                    raise TypeError
                value = tuple(float(v) if isinstance(default[0], float) else str(v)
                              for v in value)
            elif isinstance(default, bool) or value is None:
                raise TypeError
            elif isinstance(default, int):
                if isinstance(value, bool) or float(value) != int(value):
                    raise TypeError
                value = int(value)
            elif isinstance(default, float):
                if isinstance(value, bool):
                    raise TypeError
                value = float(value)
            else:
                value = str(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name}.{key}: invalid value {value!r}") from None
        kwargs[key] = value
    out = cls(**kwargs)
    for key in ("targets", "subsidy_targets"):
        if hasattr(out, key) and isinstance(getattr(out, key), str):
            parse_targets(getattr(out, key))
    if isinstance(out, SweepConfig):
        for t in out.targets:
            parse_targets(t)
        if any(b < 0 for b in out.budgets):
            raise ConfigError("sweep.budgets: must be nonnegative")
    return out


def spec_from_mapping(data: dict) -> ExperimentSpec:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a mapping at the top level")
    allowed = {"name", "primitives", "seed", "tolerance", "spillover_varsigma", *_SECTIONS}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{key}: unknown top-level key")
    prim = primitives_from_mapping(data.get("primitives") or {})
    kwargs = {name: _section(cls, data.get(name), name) for name, cls in _SECTIONS.items()}
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed: must be a nonnegative integer")
    tol = data.get("tolerance", 1e-10)
    if isinstance(tol, bool) or not isinstance(tol, (int, float)) or not 0 < tol < 1e-3:
        raise ConfigError("tolerance: must be a number in (0, 1e-3)")
    vs = data.get("spillover_varsigma", 20.0)
    if isinstance(vs, bool) or not isinstance(vs, (int, float)) or vs < 1:
        raise ConfigError("spillover_varsigma: must be a number >= 1")
    return ExperimentSpec(name=str(data.get("name", "baseline")), primitives=prim, seed=seed,
                          tolerance=float(tol), spillover_varsigma=float(vs), **kwargs)


def load_spec(path: str | Path | None) -> ExperimentSpec:
    if path is None:
        return ExperimentSpec()
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: not valid YAML ({exc})") from None
    return spec_from_mapping(data)
