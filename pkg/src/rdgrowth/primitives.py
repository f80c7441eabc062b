"""Model primitives and the small closed-form building blocks.

Everything here is a pure function of its arguments. Research types are
ordered (applied-low, applied-high, basic) wherever a per-type array is used.
"""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ModelError(ValueError):
    """Base class for domain errors raised by the model."""


class DomainError(ModelError):
    pass


class DegenerateEconomyError(ModelError):
    pass


class ConfigError(ModelError):
    pass


class ResearchType(enum.IntEnum):
    APPLIED_LOW = 0
    APPLIED_HIGH = 1
    BASIC = 2

    @property
    def label(self) -> str:
        return {0: "al", 1: "ah", 2: "b"}[int(self)]


TYPES = (ResearchType.APPLIED_LOW, ResearchType.APPLIED_HIGH, ResearchType.BASIC)


@dataclass(frozen=True)
class Primitives:
    """Exogenous parameters of the three-type economy.

    The first twelve values are the literature parameterization; entry roles
    follow the type-probability law (``alpha`` = basic, ``beta`` = high given
    applied). The last five (``epsilon``, ``gamma``, ``rho``, ``vartheta``,
    ``L_s``) are not reported with the parameterization and carry calibrated
    defaults chosen so that the baseline growth rate is close to 2.27%.
    """

    alpha: float = 0.100
    beta: float = 0.926
    phi: float = 0.216
    varphi: float = 0.037
    nu: float = 0.206
    mu: float = 0.116
    lam: float = 0.132
    eta: float = 0.219
    theta_al: float = 1.391
    theta_ah: float = 1.751
    theta_b: float = 0.681
    theta_e: float = 0.024
    # calibrated, not literature values
    epsilon: float = 2.9
    gamma: float = 0.5
    rho: float = 0.02
    vartheta: float = 2.0
    L_s: float = 0.165
    varsigma: float = 1.0

    def __post_init__(self):
        validate(self)

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.theta_al, self.theta_ah, self.theta_b])

    def replace(self, **changes) -> "Primitives":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# `lambda` is a Python keyword, so the config key maps onto `lam`.
_KEY_ALIASES = {"lambda": "lam"}
_FIELDS = {f.name for f in dataclasses.fields(Primitives)}


def validate(p: Primitives) -> None:
    def bad(key, msg):
        raise ConfigError(f"{key}: {msg}")

    for f in dataclasses.fields(p):
        v = getattr(p, f.name)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
            bad(f.name, f"must be a finite number, got {v!r}")
    for key in ("alpha", "beta"):
        if not 0.0 <= getattr(p, key) <= 1.0:
            bad(key, "must lie in [0, 1]")
    for key in ("phi", "varphi", "nu", "mu", "theta_e"):
        if getattr(p, key) < 0:
            bad(key, "must be nonnegative")
    for key in ("L_s", "rho"):
        if getattr(p, key) <= 0:
            bad(key, "must be positive")
    if not 0 < p.theta_b < p.theta_al < p.theta_ah:
        bad("theta_b", "ordering 0 < theta_b < theta_al < theta_ah violated")
    if not 0 < p.lam < p.eta:
        bad("lambda", "ordering 0 < lambda < eta violated")
    if p.epsilon <= 1:
        bad("epsilon", "must exceed 1")
    if not 0 < p.gamma < 1:
        bad("gamma", "must lie in (0, 1)")
    if p.vartheta <= 0:
        bad("vartheta", "must be positive")
    if p.varsigma < 1:
        bad("varsigma", "must be >= 1")


def primitives_from_mapping(data: dict) -> Primitives:
    """Build primitives from a flat mapping, rejecting unknown keys by name."""
    kwargs = {}
    for key, value in data.items():
        name = _KEY_ALIASES.get(key, key)
        if name not in _FIELDS:
            raise ConfigError(f"{key}: unknown primitive")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: must be a number, got {value!r}")
        kwargs[name] = float(value)
    return Primitives(**kwargs)


def load_primitives(path: str | Path) -> Primitives:
    import yaml

    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a flat key/value mapping")
    data = data.get("primitives", data)
    return primitives_from_mapping(data)


def profit_constant(epsilon: float) -> float:
    """Scale of normalized profits, pi(q) = Pi * q**(epsilon - 1)."""
    if epsilon <= 1:
        raise DomainError("epsilon must exceed 1")
    return (1.0 / (epsilon - 1.0)) * ((epsilon - 1.0) / epsilon) ** epsilon


def spillover_share(phi_al, phi_ah, phi_b, varsigma=1.0):
    """Weighted share of basic research among active lines."""
    if min(phi_al, phi_ah, phi_b) < 0:
        raise DomainError("active shares must be nonnegative")
    den = phi_al + phi_ah + varsigma * phi_b
    if den <= 0:
        raise DegenerateEconomyError("no active product lines")
    return varsigma * phi_b / den


def applied_step(xi: float, p: Primitives) -> float:
    if not 0.0 <= xi <= 1.0:
        raise DomainError("spillover share must lie in [0, 1]")
    return xi * p.eta + (1.0 - xi) * p.lam


def innovation_steps(xi: float, p: Primitives) -> np.ndarray:
    a = applied_step(xi, p)
    return np.array([a, a, p.eta])


def economy_step_average(phi_al, phi_ah, phi_b, xi, p: Primitives) -> float:
    total = phi_al + phi_ah + phi_b
    if total <= 0:
        raise DegenerateEconomyError("no active product lines")
    return ((phi_al + phi_ah) * applied_step(xi, p) + phi_b * p.eta) / total


def rd_labor_demand(x, theta, gamma):
    """Skilled labor needed for innovation rate ``x`` at capacity ``theta``."""
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0):
        raise DomainError("innovation capacity must be positive")
    if np.any(x < 0):
        raise DomainError("innovation rate must be nonnegative")
    with np.errstate(over="ignore"):
        # absurd rates (inside a root finder) demand infinite labor
        out = x ** (1.0 / (1.0 - gamma)) * theta ** (-gamma / (1.0 - gamma))
    return out if out.ndim else float(out)


def entry_type_probabilities(p: Primitives) -> np.ndarray:
    """Entrant type law as an array ordered (applied-low, applied-high, basic)."""
    low = (1.0 - p.alpha) * (1.0 - p.beta)
    high = (1.0 - p.alpha) * p.beta
    return np.array([low, high, p.alpha])


def subsidized_capacity(theta, s, gamma):
    """Capacity after a subsidy covering share ``s`` of R&D cost."""
    s = np.asarray(s, dtype=float)
    if np.any((s < 0.0) | (s >= 1.0)):
        raise DomainError("subsidy rate must lie in [0, 1)")
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0):
        raise DomainError("innovation capacity must be positive")
    gamma = np.asarray(gamma, dtype=float)
    out = theta * (1.0 - s) ** (-(1.0 - gamma) / gamma)
    return out if out.ndim else float(out)
