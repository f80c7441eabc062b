"""Policy descriptions shared by the equilibrium solver and the policy layer."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .primitives import ConfigError, ResearchType, subsidized_capacity


class PolicyKind(str, enum.Enum):
    NONE = "none"
    INCUMBENT_SUBSIDY = "incumbent_subsidy"
    PLANNER = "planner"
    PLANNER_WITH_SUBSIDY = "planner_with_subsidy"


_TARGET_NAMES = {"al": ResearchType.APPLIED_LOW, "ah": ResearchType.APPLIED_HIGH,
                 "b": ResearchType.BASIC}


def parse_targets(targets) -> frozenset:
    """Accept research types, their labels, or the shortcuts ``all``/``applied``/``basic``."""
    if isinstance(targets, str):
        key = targets.lower()
        if key in ("all", "all_types"):
            return frozenset(ResearchType)
        if key in ("applied", "applied_only"):
            return frozenset({ResearchType.APPLIED_LOW, ResearchType.APPLIED_HIGH})
        if key in ("basic", "basic_only"):
            return frozenset({ResearchType.BASIC})
        if key in ("none", ""):
            return frozenset()
        targets = [t.strip() for t in key.split(",")]
    out = set()
    for t in targets:
        if isinstance(t, ResearchType):
            out.add(t)
        elif isinstance(t, str) and t in _TARGET_NAMES:
            out.add(_TARGET_NAMES[t])
        else:
            raise ConfigError(f"targets: unknown research type {t!r}")
    return frozenset(out)


@dataclass(frozen=True)
class PolicySpec:
    """Subsidy targets and rate, plus optional planner controls.

    ``planner_controls`` is ``(x_al, x_ah, x_b, q_al_min, q_ah_min, q_b_min)``.
    ``budget_share`` is informational once ``s_inc`` has been calibrated.
    """

    kind: PolicyKind = PolicyKind.NONE
    targets: frozenset = field(default_factory=frozenset)
    s_inc: float = 0.0
    budget_share: float = 0.0
    planner_controls: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        object.__setattr__(self, "targets", parse_targets(self.targets)
                           if not isinstance(self.targets, frozenset) else self.targets)
        if not 0.0 <= self.s_inc < 1.0:
            raise ConfigError("s_inc: must lie in [0, 1)")
        if self.budget_share < 0:
            raise ConfigError("budget_share: must be nonnegative")
        if self.planner_controls is not None:
            c = tuple(float(v) for v in self.planner_controls)
            if len(c) != 6:
                raise ConfigError("planner_controls: expected six values")
            if not all(np.isfinite(c)) or min(c[:3]) < 0 or min(c[3:]) < 0:
                raise ConfigError("planner_controls: must be finite and nonnegative")
            object.__setattr__(self, "planner_controls", c)

    @property
    def is_planner(self) -> bool:
        return self.planner_controls is not None

    def with_rate(self, s_inc: float) -> "PolicySpec":
        return PolicySpec(self.kind, self.targets, s_inc, self.budget_share,
                          self.planner_controls)

    def with_controls(self, controls) -> "PolicySpec":
        kind = (PolicyKind.PLANNER_WITH_SUBSIDY if self.s_inc > 0 and self.targets
                else PolicyKind.PLANNER)
        return PolicySpec(kind, self.targets, self.s_inc, self.budget_share, tuple(controls))

    def subsidy_mask(self) -> np.ndarray:
        return np.array([t in self.targets for t in ResearchType], dtype=bool)

    def effective_capacity(self, theta, gamma) -> np.ndarray:
        """Incumbent capacities with the subsidy applied to targeted types."""
        theta = np.asarray(theta, dtype=float)
        if self.s_inc == 0.0 or not self.targets:
            return theta.copy()
        return np.where(self.subsidy_mask(), subsidized_capacity(theta, self.s_inc, gamma), theta)


NO_POLICY = PolicySpec()
