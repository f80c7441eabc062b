"""Stationary general equilibrium: fixed point, labor clearing and welfare.

The unknowns of the outer fixed point are the skilled wage and the three
expected values of innovation. The active shares and the mean relative
productivity are resolved inside the distribution solve, so every outer
evaluation returns a distribution consistent with the current rates.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, root, root_scalar

from .distributions import DistributionSet, solve_distributions
from .policyspec import NO_POLICY, PolicySpec
from .primitives import (
    ModelError,
    Primitives,
    ResearchType,
    entry_type_probabilities,
    innovation_steps,
    rd_labor_demand,
)
from .values import (
    Environment,
    entrant_rate,
    exit_threshold,
    expected_innovation_value,
    optimal_innovation_rate,
    value,
)

log = logging.getLogger(__name__)

TABLE_COLUMNS = ("x_e", "x_al", "x_ah", "x_b", "phi_al", "phi_ah", "phi_b",
                 "q_al_min", "q_ah_min", "q_b_min", "rd_labor_ratio", "tau", "g", "welfare")


class EquilibriumError(ModelError):
    """Fixed point not found; ``history`` holds (iteration, residual) pairs."""

    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


class WelfareDivergence(ModelError):
    pass


@dataclass(frozen=True)
class WelfareReport:
    u0: float
    g: float
    c0_index: float
    cost: float = 0.0


@dataclass
class EquilibriumState:
    w_s: float
    phi: np.ndarray
    expected_values: np.ndarray
    q_bar: float
    x: np.ndarray
    x_e: float
    omega: np.ndarray
    q_min: np.ndarray
    never_exit: tuple
    tau_type: np.ndarray
    tau: float
    g: float
    r: float
    xi: float
    zeta: float
    theta_eff: np.ndarray
    rd_labor: float
    skilled_residual: float
    subsidy_cost: float
    welfare: WelfareReport
    residual: float
    iterations: int
    policy: PolicySpec = field(repr=False)
    primitives: Primitives = field(repr=False)
    dist: DistributionSet = field(repr=False)

    @property
    def rd_labor_ratio(self) -> float:
        return self.rd_labor / self.primitives.L_s

    @property
    def phi_np(self) -> float:
        return 1.0 - float(np.sum(self.phi))

    @property
    def vector(self) -> np.ndarray:
        """The eight fixed-point unknowns (w, Phi x3, E x3, q_bar)."""
        return np.concatenate([[self.w_s], self.phi, self.expected_values, [self.q_bar]])

    def environment(self) -> Environment:
        return Environment(w_s=self.w_s, r=self.r, tau=self.tau, g=self.g, q_bar=self.q_bar,
                           xi=self.xi, omega=self.omega, q_min=self.q_min,
                           never_exit=self.never_exit)


def interest_rate(g: float, p: Primitives) -> float:
    """Euler equation with consumption growing at ``g``."""
    return p.rho + p.vartheta * g


def unskilled_wage(Q: float, p: Primitives) -> float:
    if Q <= 0:
        raise ModelError("productivity index must be positive")
    return (p.epsilon - 1.0) / p.epsilon * Q


def skilled_labor_demand(x, x_e, phi, theta_eff, p: Primitives):
    """Return (total skilled demand, R&D part)."""
    rd = rd_labor_demand(x_e, p.theta_e, p.gamma) + float(
        np.dot(phi, rd_labor_demand(x, theta_eff, p.gamma)))
    return rd + p.phi * float(np.sum(phi)), rd


def skilled_labor_residual(state: EquilibriumState, p: Primitives | None = None) -> float:
    p = p or state.primitives
    total, _ = skilled_labor_demand(state.x, state.x_e, state.phi, state.theta_eff, p)
    return total - p.L_s


def welfare(state_or_g, phi_total: float | None = None, p: Primitives | None = None,
            cost: float = 0.0) -> WelfareReport:
    """Lifetime utility of a stationary path with initial consumption
    ``Phi**(1/(eps-1)) * (1 - cost)`` growing at ``g``."""
    if isinstance(state_or_g, EquilibriumState):
        st = state_or_g
        return welfare(st.g, float(np.sum(st.phi)), st.primitives, st.subsidy_cost)
    g = float(state_or_g)
    if phi_total is None or p is None:
        raise ModelError("welfare needs the active mass and primitives")
    c0 = phi_total ** (1.0 / (p.epsilon - 1.0)) * (1.0 - cost)
    if c0 <= 0:
        raise WelfareDivergence("initial consumption is not positive")
    th, rho = p.vartheta, p.rho
    if abs(th - 1.0) < 1e-12:
        u0 = np.log(c0) / rho + g / rho ** 2
    else:
        den = rho - g * (1.0 - th)
        if den <= 0:
            raise WelfareDivergence("welfare integral diverges (rho <= g(1 - vartheta))")
        u0 = (c0 ** (1.0 - th) / den - 1.0 / rho) / (1.0 - th)
    return WelfareReport(u0=float(u0), g=g, c0_index=float(c0), cost=cost)


def consumption_equivalent(candidate: WelfareReport, reference: WelfareReport,
                           p: Primitives) -> float:
    """Scale ``sigma`` on the candidate's consumption path that equates utilities.

    ``sigma < 1`` means the candidate is preferred to the reference.
    """
    th, rho = p.vartheta, p.rho
    log_ratio = np.log(reference.c0_index / candidate.c0_index)
    if abs(th - 1.0) < 1e-12:
        return float(np.exp(log_ratio + (reference.g - candidate.g) / rho))
    # equal utilities: (sigma c0_c)^(1-th) / den_c = c0_r^(1-th) / den_r, with
    # den = rho - g (1 - th); log1p keeps the ratio exact near th = 1
    a, b = -candidate.g * (1.0 - th) / rho, -reference.g * (1.0 - th) / rho
    if a <= -1.0 or b <= -1.0:
        raise WelfareDivergence("no consumption equivalent exists")
    return float(np.exp(log_ratio + (np.log1p(a) - np.log1p(b)) / (1.0 - th)))


def welfare_index(candidate: WelfareReport, reference: WelfareReport, p: Primitives) -> float:
    """Welfare normalized to 100 at the reference (higher is better)."""
    return 100.0 / consumption_equivalent(candidate, reference, p)


@dataclass
class _Eval:
    resid: np.ndarray
    state: dict


class _Problem:
    """One outer evaluation: unknowns -> residuals, with distribution warm starts."""

    def __init__(self, p: Primitives, policy: PolicySpec):
        self.p = p
        self.policy = policy
        self.theta_eff = policy.effective_capacity(p.theta, p.gamma)
        self.P = entry_type_probabilities(p)
        self.phi_guess = None
        self.q_bar_guess = 1.7
        self.grid_q_bar = None   # fixed on first use; see solve_distributions
        self.best = None

    def rates(self, w, E):
        p = self.p
        if self.policy.is_planner:
            c = self.policy.planner_controls
            x = np.array(c[:3])
            q_min = np.array(c[3:])
            omega = x * E - w * rd_labor_demand(x, self.theta_eff, p.gamma)
            never = tuple(bool(q <= 0) for q in q_min)
        else:
            x = optimal_innovation_rate(E, self.theta_eff, w, p.gamma)
            omega = p.gamma * x * E
            th = [exit_threshold(o, w, p) for o in omega]
            q_min = np.array([t[0] for t in th])
            never = tuple(t[1] for t in th)
        x_e = entrant_rate(E, w, p)
        return np.asarray(x, float), float(x_e), omega, q_min, never

    def __call__(self, z) -> _Eval:
        p = self.p
        w = float(np.exp(z[0]))
        E = np.exp(np.asarray(z[1:4], float))
        x, x_e, omega, q_min, never = self.rates(w, E)
        if self.grid_q_bar is None:
            self.grid_q_bar = self.q_bar_guess
        dist = solve_distributions(x, x_e, q_min, p, q_bar_guess=self.q_bar_guess,
                                   phi_guess=self.phi_guess, grid_q_bar=self.grid_q_bar)
        self.phi_guess, self.q_bar_guess = dist.phi.copy(), dist.q_bar
        g = dist.g
        r = interest_rate(g, p)
        E_new = innovation_values(dist, w, omega, q_min, never, p)
        total, rd = skilled_labor_demand(x, x_e, dist.phi, self.theta_eff, p)
        resid = np.concatenate([[(total - p.L_s) / p.L_s],
                                np.log(np.maximum(E_new, 1e-300)) - np.log(E)])
        st = dict(w=w, E=E, E_new=E_new, x=x, x_e=x_e, omega=omega, q_min=q_min, never=never,
                  dist=dist, g=g, r=r, rd=rd, total=total)
        return _Eval(resid, st)


def innovation_values(dist: DistributionSet, w, omega, q_min, never, p: Primitives):
    """Expected post-innovation values E_k over the overall distribution."""
    env = Environment(w_s=w, r=interest_rate(dist.g, p), tau=dist.tau, g=dist.g,
                      q_bar=dist.q_bar, xi=dist.xi, omega=np.asarray(omega),
                      q_min=np.asarray(q_min), never_exit=never)
    steps = innovation_steps(dist.xi, p)
    return np.array([
        expected_innovation_value(lambda s, k=k: value(s, k, env, p), dist.q, dist.F,
                                  steps[k], dist.q_bar)
        for k in ResearchType])


class InfeasibleControls(EquilibriumError):
    """Pinned controls demand more skilled labor than is available."""


def _solve_pinned(p: Primitives, policy: PolicySpec, guess, tol) -> EquilibriumState:
    """Equilibrium with incumbent rates and thresholds pinned by the planner.

    Skilled-labor clearing is then a one-dimensional condition on the entry
    rate: the wage only reaches labor demand through entrants. Given the
    resulting distribution, the wage and expected values solve a small fixed
    point that needs no further distribution solves.
    """
    prob = _Problem(p, policy)
    c = policy.planner_controls
    x = np.array(c[:3])
    q_min = np.array(c[3:])
    never = tuple(bool(q <= 0) for q in q_min)
    theta_eff = prob.theta_eff
    warm = {"phi": None, "q_bar": 1.7, "x_e": None}
    if isinstance(guess, EquilibriumState):
        warm.update(phi=guess.phi.copy(), q_bar=guess.q_bar, x_e=guess.x_e)
    dists = {}
    grid_q_bar = warm["q_bar"]

    gaps = {}

    def gap(xe):
        # memoized so that bracket endpoints keep their sign inside the root finder
        if xe in gaps:
            return gaps[xe]
        d = solve_distributions(x, xe, q_min, p, q_bar_guess=warm["q_bar"],
                                phi_guess=warm["phi"], grid_q_bar=grid_q_bar)
        if xe > 0:
            # without entry some types vanish; that is a poor warm start
            warm["phi"], warm["q_bar"] = d.phi.copy(), d.q_bar
        dists[xe] = d
        total, _ = skilled_labor_demand(x, xe, d.phi, theta_eff, p)
        gaps[xe] = (total - p.L_s) / p.L_s
        return gaps[xe]

    def gap_at_zero():
        # too much demand even without entrants means no entry rate clears
        try:
            return gap(0.0)
        except DegenerateEconomyError:
            gaps[0.0] = -1.0
            return -1.0

    xe_cap = (p.L_s * p.theta_e ** (p.gamma / (1 - p.gamma))) ** (1 - p.gamma)
    lo = hi = None
    x0 = warm["x_e"]
    x_e = None
    if x0 is not None and 0 < x0 < xe_cap and warm["phi"] is not None:
        # entry rate solved jointly with the shares: one distribution solve
        def entry_gap(xe, phi):
            total, _ = skilled_labor_demand(x, xe, phi, theta_eff, p)
            return (total - p.L_s) / p.L_s
        try:
            d = solve_distributions(x, x0, q_min, p, q_bar_guess=warm["q_bar"],
                                    phi_guess=warm["phi"], entry_gap=entry_gap,
                                    grid_q_bar=grid_q_bar)
            if 0 < d.x_e < xe_cap:
                x_e = d.x_e
                dists[x_e] = d
        except ModelError:
            pass
    if x_e is None and x0 is not None and 0 < x0 < xe_cap:
        g_mid = gap(x0)
        if g_mid > 0 and gap_at_zero() >= 0:
            raise InfeasibleControls("incumbent controls exhaust skilled labor without entry")
        # secant steps on the entry rate; the gap is smooth and convex in it
        try:
            with warnings.catch_warnings():
                # a stalled step is fine: the candidate is checked below
                warnings.simplefilter("ignore", RuntimeWarning)
                sec = root_scalar(gap, x0=x0, x1=x0 * (1.2 if g_mid < 0 else 1 / 1.2),
                                  method="secant", xtol=1e-14 * x0, rtol=1e-12, maxiter=12)
            cand = float(sec.root)
            if sec.converged and 0 < cand < xe_cap and abs(gap(cand)) < 1e-12:
                x_e = cand
        except ModelError:
            pass
    if x_e is None and x0 is not None and 0 < x0 < xe_cap:
        # bracket around the previous entry rate, widening geometrically
        g_mid = gap(x0)
        if g_mid == 0.0:
            lo = hi = x0
        step = 1.25
        a = b = x0
        while lo is None or hi is None:
            if g_mid < 0:
                lo = a
                b = min(b * step, xe_cap)
                if gap(b) > 0:
                    hi = b
                elif b >= xe_cap:
                    raise InfeasibleControls("entry cannot absorb the skilled-labor slack")
            else:
                hi = b
                a = a / step
                if a < 1e-12 * x0:
                    break
                if gap(a) < 0:
                    lo = a
            step = step ** 2
    if x_e is None:
        if lo is None or hi is None:
            if gap(0.0) >= 0:
                raise InfeasibleControls("incumbent controls exhaust skilled labor without entry")
            lo, hi = 0.0, xe_cap if hi is None else hi
        x_e = lo if lo == hi else brentq(gap, lo, hi, xtol=1e-15, rtol=1e-13, maxiter=200)
    dist = dists.get(x_e) or solve_distributions(x, x_e, q_min, p, q_bar_guess=warm["q_bar"],
                                                phi_guess=warm["phi"], grid_q_bar=grid_q_bar)
    total, rd = skilled_labor_demand(x, x_e, dist.phi, theta_eff, p)
    P = entry_type_probabilities(p)
    wage_per_ev = (1 - p.gamma) * (p.theta_e / x_e) ** (p.gamma / (1 - p.gamma))

    def unpack(z):
        E = np.exp(z)
        w = wage_per_ev * float(P @ E)
        omega = x * E - w * rd_labor_demand(x, theta_eff, p.gamma)
        return E, w, omega

    def resid(z):
        E, w, omega = unpack(z)
        E_new = innovation_values(dist, w, omega, q_min, never, p)
        return np.log(np.maximum(E_new, 1e-300)) - z

    z0 = (np.log(guess.expected_values) if isinstance(guess, EquilibriumState)
          else _initial_guess(p)[1:])
    sol = root(resid, z0, method="hybr", options={"xtol": 1e-13})
    z = sol.x
    r_val = resid(z)
    for _ in range(2000):
        if np.max(np.abs(r_val)) < tol:
            break
        z = z + 0.5 * r_val
        r_val = resid(z)
    else:
        raise EquilibriumError(f"value fixed point not found ({np.max(np.abs(r_val)):.3e})")
    E, w, omega = unpack(z)
    lab = (total - p.L_s) / p.L_s
    st = dict(w=w, E=E, x=x, x_e=x_e, omega=omega, q_min=q_min, never=never, dist=dist,
              r=interest_rate(dist.g, p), rd=rd, total=total)
    residual = float(max(np.max(np.abs(r_val)), abs(lab)))
    return _assemble(_Eval(np.concatenate([[lab], r_val]), st), prob, policy, p,
                     residual, len(dists))


def _initial_guess(p: Primitives):
    # expected values scale with the wage; these ratios sit near the default
    # calibration and only seed the solver
    w = 1.9
    return np.log(np.array([w, 0.37 * w, 0.44 * w, 0.42 * w]))


def solve_equilibrium(p: Primitives, policy: PolicySpec = NO_POLICY, *,
                      guess: EquilibriumState | np.ndarray | None = None,
                      tol: float = 1e-10, max_iter: int = 10_000,
                      damping: float = 0.5) -> EquilibriumState:
    """Solve the stationary equilibrium under ``policy``.

    A quasi-Newton (Powell hybrid) step on the outer residuals is tried first;
    if it stalls, damped fixed-point iteration with a bounded wage update
    takes over from the best point found.
    """
    if policy.is_planner:
        return _solve_pinned(p, policy, guess, tol)
    prob = _Problem(p, policy)
    if isinstance(guess, EquilibriumState):
        z0 = np.log(np.concatenate([[guess.w_s], guess.expected_values]))
        prob.phi_guess, prob.q_bar_guess = guess.phi.copy(), guess.q_bar
    elif guess is not None:
        z0 = np.asarray(guess, float)
    else:
        z0 = _initial_guess(p)

    history = []
    cache = {}

    def fun(z):
        key = tuple(np.round(z, 15))
        if key not in cache:
            try:
                ev = prob(z)
            except ModelError as exc:
                log.debug("outer evaluation failed at %s: %s", z, exc)
                return np.full(4, 1e3)
            cache.clear()
            cache[key] = ev
            history.append((len(history), float(np.max(np.abs(ev.resid)))))
        return cache[key].resid

    sol = root(fun, z0, method="hybr", options={"xtol": 1e-12, "maxfev": 400})
    z = sol.x
    res = fun(z)
    n_iter = len(history)
    if not np.max(np.abs(res)) < tol:
        z = z if np.max(np.abs(res)) < 1e2 else z0.copy()
        for it in range(max_iter):
            res = fun(z)
            if np.max(np.abs(res)) < tol:
                break
            if np.max(np.abs(res)) >= 1e3:
                raise EquilibriumError("outer evaluation failed during damped iteration",
                                       history)
            z = z.copy()
            z[1:] = z[1:] + damping * res[1:]
            # demand above supply raises the wage; step is bounded
            z[0] = z[0] + float(np.clip(damping * res[0], -0.2, 0.2))
        else:
            raise EquilibriumError(
                f"fixed point not found (residual {np.max(np.abs(res)):.3e})", history)
        n_iter = len(history)
    ev = cache[tuple(np.round(z, 15))]
    return _assemble(ev, prob, policy, p, float(np.max(np.abs(res))), n_iter)


def subsidy_cost_of(x, phi, theta, w, policy: PolicySpec, p: Primitives) -> float:
    """Subsidy outlay as a share of output: ``s * w * sum_targets G(x, theta) * Phi``.

    ``G`` is evaluated at the unsubsidized capacity, i.e. the outlay is the
    share ``s`` of the private R&D labor cost the targeted types would face
    without support.
    """
    if policy.s_inc == 0.0 or not policy.targets:
        return 0.0
    mask = policy.subsidy_mask()
    G = rd_labor_demand(x, theta, p.gamma)
    return float(policy.s_inc * w * np.sum(np.where(mask, G * phi, 0.0)))


def _assemble(ev: _Eval, prob: _Problem, policy, p, residual, n_iter) -> EquilibriumState:
    s = ev.state
    dist = s["dist"]
    cost = subsidy_cost_of(s["x"], dist.phi, p.theta, s["w"], policy, p)
    st = EquilibriumState(
        w_s=s["w"], phi=dist.phi.copy(), expected_values=s["E"].copy(), q_bar=dist.q_bar,
        x=s["x"], x_e=s["x_e"], omega=np.asarray(s["omega"]), q_min=np.asarray(s["q_min"]),
        never_exit=s["never"], tau_type=dist.tau_type.copy(), tau=dist.tau, g=dist.g,
        r=s["r"], xi=dist.xi, zeta=dist.zeta, theta_eff=prob.theta_eff, rd_labor=s["rd"],
        skilled_residual=s["total"] - p.L_s, subsidy_cost=cost,
        welfare=WelfareReport(0.0, 0.0, 0.0), residual=residual, iterations=n_iter,
        policy=policy, primitives=p, dist=dist)
    st.welfare = welfare(st)
    return st


def table_row(state: EquilibriumState, reference: EquilibriumState | None = None) -> dict:
    """Canonical 14-column row in percent (welfare index relative to ``reference``)."""
    ref = reference if reference is not None else state
    welf = welfare_index(state.welfare, ref.welfare, state.primitives)
    vals = [state.x_e, *state.x, *state.phi, *state.q_min, state.rd_labor_ratio,
            state.tau, state.g]
    row = {k: 100.0 * float(v) for k, v in zip(TABLE_COLUMNS[:-1], vals)}
    row["welfare"] = float(welf)
    return row
