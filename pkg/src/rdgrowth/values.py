"""Per-good value functions, R&D option values and exit thresholds.

All quantities are normalized by the productivity index. A value curve is the
closed-form solution of

    (Psi + iota) V + g q V' = Pi q**(eps-1) - w*phi + Omega + iota * V_al(q)

with V(q_min) = 0, where Psi = r + tau + varphi and iota is the rate at which
the type decays into applied-low research (zero for applied-low itself).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .primitives import (
    DomainError,
    ModelError,
    Primitives,
    ResearchType,
    entry_type_probabilities,
    profit_constant,
    rd_labor_demand,
)


class EnvironmentError_(ModelError):
    """Environment cannot support value evaluation (Psi <= 0 or g <= 0)."""


@dataclass(frozen=True)
class Environment:
    w_s: float
    r: float
    tau: float
    g: float
    q_bar: float
    xi: float
    omega: np.ndarray
    q_min: np.ndarray
    never_exit: tuple = field(default=(False, False, False))

    @property
    def psi(self) -> float:
        return self.r + self.tau

    def check(self, p: Primitives) -> None:
        if self.psi + p.varphi <= 0:
            raise EnvironmentError_("Psi = r + tau + varphi must be positive")
        if self.g <= 0:
            raise EnvironmentError_("growth rate must be positive")
        if np.any(np.asarray(self.q_min) < 0):
            raise EnvironmentError_("exit thresholds must be nonnegative")


def _one_minus_ratio_pow(q_min, q, expo):
    """1 - (q_min/q)**expo evaluated in log space; exactly 1 when q_min == 0."""
    q = np.asarray(q, dtype=float)
    if q_min <= 0:
        return np.ones_like(q)
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = expo * np.log(q_min / q)
    # (q_min/q)**expo below 1e-300 is flushed to zero
    lr = np.where(lr < -690.0, -np.inf, lr)
    return -np.expm1(lr)


def _ratio_pow(q_min, q, expo):
    q = np.asarray(q, dtype=float)
    if q_min <= 0:
        return np.zeros_like(q)
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = expo * np.log(q_min / q)
    return np.where(lr < -690.0, 0.0, np.exp(np.minimum(lr, 700.0)))


def _branch(q, q_min, omega, rate, env: Environment, p: Primitives):
    """Particular-plus-homogeneous solution vanishing at ``q_min``.

    ``rate`` is the effective discount Psi (+ iota).
    """
    eps = p.epsilon
    Pi = profit_constant(eps)
    g = env.g
    a1 = rate + g * (eps - 1.0)
    return (Pi * q ** (eps - 1.0) / a1 * _one_minus_ratio_pow(q_min, q, a1 / g)
            + (omega - env.w_s * p.phi) / rate * _one_minus_ratio_pow(q_min, q, rate / g))


def _iota(k: ResearchType, p: Primitives) -> float:
    if k == ResearchType.APPLIED_HIGH:
        return p.nu
    if k == ResearchType.BASIC:
        return p.mu
    return 0.0


def value_applied_low_unclamped(q, env: Environment, p: Primitives):
    q = np.asarray(q, dtype=float)
    psi = env.psi + p.varphi
    return _branch(q, env.q_min[0], env.omega[0], psi, env, p)


def value_applied_low(q, env: Environment, p: Primitives):
    env.check(p)
    q = np.asarray(q, dtype=float)
    q_al = env.q_min[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        v = value_applied_low_unclamped(np.where(q > 0, q, 1.0), env, p)
    return np.where(q > q_al, np.maximum(v, 0.0), 0.0)


def value_transitioning_unclamped(q, k: ResearchType, env: Environment, p: Primitives):
    """Unclamped solution above the own threshold, by knot order."""
    q = np.asarray(q, dtype=float)
    psi = env.psi + p.varphi
    iota = _iota(k, p)
    q_k = env.q_min[int(k)]
    q_al = env.q_min[0]
    own = _branch(q, q_k, env.omega[int(k)], psi + iota, env, p)

    def upper(z):
        # applied-low continuation minus the same curve discounted at Psi + iota;
        # vanishes at q_al
        return (_branch(z, q_al, env.omega[0], psi, env, p)
                - _branch(z, q_al, env.omega[0], psi + iota, env, p))

    if q_k <= q_al:
        return np.where(q >= q_al, own + upper(np.maximum(q, q_al)), own)
    # reversed order: the middle piece is empty; the homogeneous term restores
    # the boundary condition at q_k
    return own + upper(q) - upper(np.array(q_k)) * _ratio_pow(q_k, q, (psi + iota) / env.g)


def value_transitioning(q, k: ResearchType, env: Environment, p: Primitives):
    if k not in (ResearchType.APPLIED_HIGH, ResearchType.BASIC):
        raise DomainError("transitioning value applies to applied-high and basic types")
    env.check(p)
    q = np.asarray(q, dtype=float)
    q_k = env.q_min[int(k)]
    with np.errstate(divide="ignore", invalid="ignore"):
        v = value_transitioning_unclamped(np.where(q > 0, q, 1.0), k, env, p)
    return np.where(q > q_k, np.maximum(v, 0.0), 0.0)


def value(q, k: ResearchType, env: Environment, p: Primitives):
    """Per-good value of a type-``k`` product line at relative productivity ``q``."""
    if ResearchType(k) == ResearchType.APPLIED_LOW:
        return value_applied_low(q, env, p)
    return value_transitioning(q, ResearchType(k), env, p)


def firm_value(q_set, k: ResearchType, env: Environment, p: Primitives) -> float:
    """Value of a multi-good firm: the sum of its per-good values."""
    return float(np.sum(value(np.asarray(q_set, dtype=float), k, env, p)))


def exit_threshold(omega: float, w_s: float, p: Primitives) -> tuple[float, bool]:
    """Exit threshold and a flag that is True when the line never exits."""
    num = w_s * p.phi - omega
    if num <= 0:
        return 0.0, True
    return (num / profit_constant(p.epsilon)) ** (1.0 / (p.epsilon - 1.0)), False


def optimal_innovation_rate(expected_gain, theta, w_s, gamma):
    if w_s <= 0:
        raise EnvironmentError_("skilled wage must be positive")
    gain = np.maximum(np.asarray(expected_gain, dtype=float), 0.0)
    out = np.asarray(theta) * ((1.0 - gamma) * gain / w_s) ** ((1.0 - gamma) / gamma)
    return out if out.ndim else float(out)


def rd_option_value(expected_gain, theta, w_s, gamma):
    """Maximized value of R&D, x*E - w*G(x*, theta)."""
    x = optimal_innovation_rate(expected_gain, theta, w_s, gamma)
    out = x * np.asarray(expected_gain) - w_s * rd_labor_demand(x, theta, gamma)
    return out if np.ndim(out) else float(out)


def expected_innovation_value(curve, q_nodes, cdf, step, q_bar, atol=1e-8):
    """E[V(q + step*q_bar)] under the CDF sampled at ``q_nodes``.

    Stieltjes trapezoid sum; mass below the first node is placed there.
    """
    q_nodes = np.asarray(q_nodes, dtype=float)
    cdf = np.asarray(cdf, dtype=float)
    if cdf.shape != q_nodes.shape or np.any(np.diff(cdf) < -atol) or cdf[0] < -atol:
        raise DomainError("distribution must be a nondecreasing CDF on the grid")
    if abs(cdf[-1] - 1.0) > 1e-6:
        raise DomainError(f"distribution is not normalized (F(max) = {cdf[-1]:.3g})")
    v = curve(q_nodes + step * q_bar)
    return float(v[0] * cdf[0] + np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(cdf)))


def entrant_rate(expected_values, w_s, p: Primitives, theta_e=None):
    """Entrant innovation rate given per-type expected values of innovation."""
    ev = float(np.dot(entry_type_probabilities(p), expected_values))
    theta_e = p.theta_e if theta_e is None else theta_e
    return optimal_innovation_rate(ev, theta_e, w_s, p.gamma)
