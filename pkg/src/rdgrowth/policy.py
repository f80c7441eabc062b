"""R&D subsidies, net welfare and the social planner.

A subsidy at rate ``s`` on targeted incumbents scales their capacity to
``theta (1-s)**(-(1-gamma)/gamma)``, so that they need only the fraction
``1-s`` of the skilled labor for a given innovation rate. The government pays
``s`` times the unsubsidized R&D wage bill in goods; this outlay is deducted
from consumption when welfare is compared.

The planner pins incumbent innovation rates and exit thresholds. Firms still
price optimally, entrants still optimize, and wages clear the labor markets.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .equilibrium import (
    EquilibriumState,
    WelfareDivergence,
    solve_equilibrium,
    subsidy_cost_of,
    welfare_index,
)
from .policyspec import NO_POLICY, PolicyKind, PolicySpec, parse_targets
from .primitives import ModelError, Primitives

log = logging.getLogger(__name__)


class InfeasibleBudgetError(ModelError):
    pass


class PlannerError(ModelError):
    pass


def subsidy_cost(state: EquilibriumState, policy: PolicySpec | None = None,
                 p: Primitives | None = None) -> float:
    """Subsidy outlay relative to output for ``policy`` at ``state``."""
    policy = state.policy if policy is None else policy
    p = state.primitives if p is None else p
    return subsidy_cost_of(state.x, state.phi, p.theta, state.w_s, policy, p)


def calibrate_subsidy_rate(budget_share: float, targets, p: Primitives, *,
                           baseline: EquilibriumState | None = None, tol: float = 1e-9,
                           s_max: float = 0.95) -> tuple[float, EquilibriumState]:
    """Subsidy rate whose equilibrium outlay equals ``budget_share`` of output.

    Returns the rate and the solved equilibrium at that rate.
    """
    targets = parse_targets(targets)
    if budget_share < 0:
        raise InfeasibleBudgetError("budget share must be nonnegative")
    base = baseline if baseline is not None else solve_equilibrium(p)
    if budget_share >= 1:
        raise InfeasibleBudgetError("budget share must be below one")
    if budget_share == 0 or not targets:
        if budget_share > 0:
            raise InfeasibleBudgetError("positive budget with no targeted types")
        return 0.0, base
    template = PolicySpec(PolicyKind.INCUMBENT_SUBSIDY, targets, 0.0, budget_share)
    solved = {0.0: base}

    def state_at(s):
        if s not in solved:
            near = min(solved, key=lambda v: abs(v - s))
            solved[s] = solve_equilibrium(p, template.with_rate(s), guess=solved[near])
        return solved[s]

    def gap(s):
        # the outlay is strongly convex in the rate; its log is close to linear
        try:
            cost = state_at(s).subsidy_cost
        except WelfareDivergence:
            # the outlay swallows all consumption: far above any feasible budget
            return 50.0
        return np.log(cost) - np.log(budget_share) if cost > 0 else -np.inf

    lo, hi = 0.0, 0.05
    while gap(hi) < 0:
        if hi >= s_max:
            raise InfeasibleBudgetError(
                f"budget {budget_share:.4g} not reachable with subsidy rate below {s_max}")
        lo, hi = hi, min(s_max, hi * 2.0)
    if lo == 0.0:
        lo = hi * 1e-6
        while gap(lo) >= 0:
            lo *= 1e-3
    s = brentq(gap, lo, hi, xtol=1e-12, rtol=1e-12, maxiter=200)
    st = state_at(s)
    if abs(st.subsidy_cost - budget_share) > max(tol, 1e-6):
        raise InfeasibleBudgetError("subsidy rate root did not meet the budget")
    return float(s), st


@dataclass
class PolicyResult:
    policy: PolicySpec
    state: EquilibriumState
    welfare_index: float


def net_welfare(policy: PolicySpec, p: Primitives, *,
                baseline: EquilibriumState | None = None) -> PolicyResult:
    """Solve under ``policy`` (calibrating the rate to its budget if needed)
    and return the welfare index net of subsidy outlays, baseline = 100."""
    base = baseline if baseline is not None else solve_equilibrium(p)
    if policy.kind == PolicyKind.NONE:
        return PolicyResult(NO_POLICY, base, 100.0)
    if policy.s_inc == 0.0 and policy.budget_share > 0:
        s, st = calibrate_subsidy_rate(policy.budget_share, policy.targets, p, baseline=base)
        policy = policy.with_rate(s)
    else:
        st = solve_equilibrium(p, policy, guess=base)
    return PolicyResult(policy, st, welfare_index(st.welfare, base.welfare, p))


def controls_of(state: EquilibriumState) -> np.ndarray:
    return np.concatenate([state.x, state.q_min])


def planner_objective(controls, subsidy: PolicySpec | None, p: Primitives, *,
                      baseline: EquilibriumState, guess: EquilibriumState | None = None):
    """Welfare index (net of subsidy outlays) of the equilibrium with pinned controls.

    Returns ``(index, state)``; infeasible controls give ``(-inf, None)``.
    """
    controls = np.asarray(controls, dtype=float)
    if controls.shape != (6,) or np.any(controls <= 0) or not np.all(np.isfinite(controls)):
        return -np.inf, None
    base_policy = subsidy if subsidy is not None else NO_POLICY
    policy = base_policy.with_controls(controls)
    try:
        # the search probes infeasible corners; failures are scored -inf
        with np.errstate(all="ignore"):
            st = solve_equilibrium(p, policy, guess=guess if guess is not None else baseline)
    except ModelError as exc:
        log.debug("planner controls infeasible: %s", exc)
        return -np.inf, None
    if not np.isfinite(st.welfare.u0):
        return -np.inf, None
    return welfare_index(st.welfare, baseline.welfare, p), st


@dataclass
class PlannerResult:
    controls: np.ndarray
    state: EquilibriumState
    welfare_index: float
    trace: list = field(default_factory=list)   # (start, evaluation, controls..., welfare)
    starts: list = field(default_factory=list)  # (start, best welfare, evaluations)


def _start_points(x0: np.ndarray, n_starts: int, seed: int) -> list[np.ndarray]:
    rng = np.random.Generator(np.random.Philox(seed))
    pts = [x0.copy()]
    for _ in range(n_starts - 1):
        pts.append(x0 + rng.uniform(-0.5, 0.5, size=x0.size))
    return pts


def optimize_planner(p: Primitives, subsidy: PolicySpec | None = None, *,
                     baseline: EquilibriumState | None = None, n_starts: int = 8,
                     max_evals: int = 2000, xatol: float = 1e-4, seed: int = 0,
                     start_state: EquilibriumState | None = None) -> PlannerResult:
    """Maximize the planner objective over ``(x_k, q_k_min)`` with multi-start
    Nelder-Mead in log-control space.

    The first start is the market equilibrium under the same subsidy (so the
    planner can always replicate it); the rest are seeded perturbations.
    """
    if n_starts < 1:
        raise PlannerError("need at least one start")
    base = baseline if baseline is not None else solve_equilibrium(p)
    if start_state is None:
        start_state = base
        if subsidy is not None and subsidy.s_inc > 0:
            start_state = solve_equilibrium(p, subsidy, guess=base)
    # a never-exit market threshold is seeded just above zero
    c0 = np.maximum(controls_of(start_state), 1e-6)
    trace: list = []
    summaries = []
    best = (-np.inf, None, None)

    # every evaluation starts from the same state: with pinned controls the
    # stationary system can have several solutions, and chaining warm starts
    # along the search path would let the objective switch between them
    for i, z0 in enumerate(_start_points(np.log(c0), n_starts, seed)):
        count = [0]

        def neg(z):
            count[0] += 1
            val, _ = planner_objective(np.exp(z), subsidy, p, baseline=base,
                                       guess=start_state)
            trace.append((i, count[0], *np.exp(z), val))
            return -val if np.isfinite(val) else 1e10

        res = minimize(neg, z0, method="Nelder-Mead",
                       options={"maxfev": max_evals, "xatol": xatol, "fatol": np.inf,
                                "adaptive": True})
        val, st = planner_objective(np.exp(res.x), subsidy, p, baseline=base,
                                    guess=start_state)
        summaries.append((i, val, count[0]))
        cand = (val, np.exp(res.x), st)
        if _better(cand, best):
            best = cand
    if best[2] is None:
        raise PlannerError("all planner starts were infeasible")
    return PlannerResult(best[1], best[2], float(best[0]), trace, summaries)


def _better(a, b) -> bool:
    """Best-by-value; exact ties broken by lexicographically smaller controls."""
    if a[0] != b[0]:
        return a[0] > b[0]
    if b[1] is None:
        return a[1] is not None
    return tuple(a[1]) < tuple(b[1])
