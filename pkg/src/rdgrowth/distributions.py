"""Stationary productivity distributions.

Relative productivities are handled on the scale-free axis ``u = q / q_bar``.
With ``g = tau * zeta`` the overall CDF solves the advance-delay equation

    zeta * u * F'(u) = F(u) - F(u - zeta)

whose solution has mean one, independent of every other equilibrium object
except ``zeta``. Per-type (unnormalized) CDFs then follow from

    g u F_k'(u) = C_k F_k(u) - S_k(u) + K_k,    F_k(u_k) = 0,

where ``C_k = tau + varphi + (outflow to applied-low)``, ``S_k`` collects the
inflows above the threshold and ``K_k`` is the exit flux at the threshold. The
bounded solution is ``F_k = (A_k(u) - A_k(u_k)) / C_k`` with

    A_k(u) = c int_u^inf (u/t)^c S_k(t) dt / t,   c = C_k / g,

which is evaluated exactly for ``S`` piecewise linear in ``log u``.
"""
from __future__ import annotations

import csv
import functools
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.optimize import brentq, root

from .primitives import (
    DegenerateEconomyError,
    ModelError,
    Primitives,
    economy_step_average,
    entry_type_probabilities,
    spillover_share,
)


class DistributionError(ModelError):
    pass


class GridCoverageError(DistributionError):
    pass


# points per innovation step on the uniform axis of the overall CDF
STEPS_PER_ZETA = 400
# log-grid resolution for the per-type CDFs
LOG_NODES = 1600
# local refinement above each threshold for the one-sided exit-flux estimate
FLUX_STEP = 1e-5


@numba.njit(cache=True)
def _march_overall(zeta, m, tol, max_nodes):
    h = zeta / m
    F = np.empty(max_nodes)
    inv = 1.0 / zeta
    # seed: the delayed term vanishes on [0, zeta]
    for i in range(m + 1):
        F[i] = (i / m) ** inv
    n = m + 1
    scale = 1.0
    while n < max_nodes:
        i = n - 1
        u0 = i * h
        u1 = u0 + h
        d0 = F[i - m]
        d1 = F[i + 1 - m]
        c0 = h / (2.0 * zeta * u0)
        c1 = h / (2.0 * zeta * u1)
        F[n] = (F[i] + c0 * (F[i] - d0) - c1 * d1) / (1.0 - c1)
        if F[n] > 1e200:
            for j in range(n + 1):
                F[j] *= 1e-200
            scale *= 1e200
        n += 1
        if n > 2 * m and F[n - 1] - F[n - 1 - m] <= tol * F[n - 1]:
            break
    return F[:n], n < max_nodes


@functools.lru_cache(maxsize=64)
def _overall_cdf_cached(zeta: float, m: int):
    F, ok = _march_overall(zeta, m, 1e-15, 200 * m)
    if not ok:
        raise DistributionError("overall CDF did not settle within the node cap")
    F = F / F[-1]
    u = np.arange(F.size) * (zeta / m)
    # slopes from the governing equation itself, for Hermite interpolation
    dF = np.zeros_like(F)
    dF[1:m + 1] = F[1:m + 1] / (zeta * u[1:m + 1])
    dF[m + 1:] = (F[m + 1:] - F[1:-m]) / (zeta * u[m + 1:])
    # rescale the axis so the trapezoid mean is exactly one
    mean = np.sum(0.5 * ((1 - F[1:]) + (1 - F[:-1])) * np.diff(u))
    u = u / mean
    dF = dF * mean
    for arr in (u, F, dF):
        arr.setflags(write=False)
    return u, F, dF


@functools.lru_cache(maxsize=64)
def overall_interpolant(zeta: float, m: int = STEPS_PER_ZETA) -> "OverallCDF":
    return OverallCDF(zeta, m)


def overall_cdf(zeta: float, m: int = STEPS_PER_ZETA):
    """Scale-free overall CDF ``(u, F)`` for economy step average ``zeta``."""
    if not zeta > 0:
        raise DistributionError("step average must be positive")
    u, F, _ = _overall_cdf_cached(float(zeta), int(m))
    return u, F


@numba.njit(cache=True)
def _hermite_uniform(x, h, F, dF):
    """Cubic Hermite interpolation on the uniform grid ``i * h``; 0 below the
    grid, 1 above it."""
    out = np.empty(x.size)
    n = F.size
    top = (n - 1) * h
    for j in range(x.size):
        v = x[j]
        if v <= 0.0:
            out[j] = 0.0
        elif v >= top:
            out[j] = 1.0
        else:
            i = min(int(v / h), n - 2)
            t = v / h - i
            t2 = t * t
            t3 = t2 * t
            c = (2 * t3 - 3 * t2 + 1) * F[i] + (t3 - 2 * t2 + t) * h * dF[i] \
                + (-2 * t3 + 3 * t2) * F[i + 1] + (t3 - t2) * h * dF[i + 1]
            out[j] = min(max(c, 0.0), 1.0)
    return out


class OverallCDF:
    """Cubic Hermite interpolant of the overall CDF, 0 below and 1 above."""

    def __init__(self, zeta: float, m: int = STEPS_PER_ZETA):
        if not zeta > 0:
            raise DistributionError("step average must be positive")
        self.u, self.F, self.dF = _overall_cdf_cached(float(zeta), int(m))
        self._h = float(self.u[1])

    @property
    def top(self) -> float:
        return float(self.u[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = _hermite_uniform(np.ravel(x), self._h, self.F, self.dF)
        return out.reshape(x.shape) if x.ndim else float(out[0])


@numba.njit(cache=True)
def _tail_transform(y, S, c):
    """A_i = c int_{u_i}^inf (u_i/t)^c S(t) dt/t on a log grid ``y``."""
    n = y.size
    A = np.empty(n)
    A[n - 1] = S[n - 1]
    for i in range(n - 2, -1, -1):
        a = c * (y[i + 1] - y[i])
        e = np.exp(-a)
        if a > 1e-6:
            lin = (1.0 - e * (1.0 + a)) / a
        else:
            lin = a / 2.0 - a * a / 3.0
        A[i] = e * A[i + 1] + S[i] * (1.0 - e) + (S[i + 1] - S[i]) * lin
    return A


def type_cdf(y, S, c_rate, g, k_idx):
    """Per-type unnormalized CDF on log grid ``y`` with threshold node ``k_idx``.

    Returns the CDF (zero at and below the threshold) and the exit flux
    ``A(u_k)`` implied by the closed form.
    """
    A = _tail_transform(y, S, c_rate / g)
    Fk = (A - A[k_idx]) / c_rate
    Fk[: k_idx + 1] = 0.0
    return np.maximum(Fk, 0.0), A[k_idx]


@dataclass
class DistributionSet:
    u: np.ndarray                 # log-grid nodes on the scale-free axis
    F: np.ndarray                 # overall CDF at u
    F_type: np.ndarray            # (3, n) unnormalized per-type CDFs at u
    phi: np.ndarray               # active shares
    q_bar: float
    tau_type: np.ndarray
    xi: float
    zeta: float
    u_min: np.ndarray             # thresholds on the scale-free axis
    flux: np.ndarray              # exit flux per type from the closed form
    overall: OverallCDF = field(repr=False, default=None)
    x_e: float = float("nan")     # entry rate the distribution was solved at

    @property
    def phi_np(self) -> float:
        return 1.0 - float(np.sum(self.phi))

    @property
    def tau(self) -> float:
        return float(np.sum(self.tau_type))

    @property
    def g(self) -> float:
        return growth_rate(self, self.zeta)

    @property
    def q(self) -> np.ndarray:
        return self.u * self.q_bar

    def overall_on(self, q):
        """Overall CDF evaluated at relative productivities ``q``."""
        return self.overall(np.asarray(q) / self.q_bar)

    def to_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["q_hat", "F", "F_al", "F_ah", "F_b"])
            for i in range(self.u.size):
                w.writerow([repr(float(self.q[i])), repr(float(self.F[i]))]
                           + [repr(float(v)) for v in self.F_type[:, i]])


def growth_rate(dist: DistributionSet, zeta: float) -> float:
    return dist.tau * zeta


def mean_relative_productivity(q, F) -> float:
    """Mean of a nonnegative variate from its CDF, int (1 - F) dq (trapezoid)."""
    q = np.asarray(q, dtype=float)
    F = np.asarray(F, dtype=float)
    G = 1.0 - F
    # on [0, q_0] the survivor function is one (no mass below the first node)
    head = max(q[0], 0.0)
    return float(head + np.sum(0.5 * (G[1:] + G[:-1]) * np.diff(q)))


def _log_grid(q_lo, q_hi, anchors, n):
    """Log grid in relative-productivity space with each anchor as a node,
    followed by two closely spaced nodes for one-sided differences."""
    y = np.linspace(np.log(q_lo), np.log(q_hi), n)
    extra = []
    for a in anchors:
        if a > 0:
            la = np.log(a)
            extra += [la, la + FLUX_STEP, la + 2 * FLUX_STEP]
    return np.unique(np.concatenate([y, extra]))


def _solve_types(y, u_min, tau_type, tau, g, zeta, Fo: OverallCDF, p: Primitives):
    """Per-type CDFs for fixed rates on log grid ``y`` (scale-free axis)."""
    u = np.exp(y)
    Fu = Fo(u)
    Fd = Fo(u - zeta)
    idx = np.searchsorted(y, np.log(u_min) - 1e-12)
    out = np.zeros((3, u.size))
    flux = np.zeros(3)
    outflow = (0.0, p.nu, p.mu)
    for k in (1, 2, 0):
        S = tau_type[k] * (Fd - Fo(u_min[k] - zeta))
        if k == 0:
            i0 = idx[0]
            S = S + p.nu * (out[1] - out[1][i0]) + p.mu * (out[2] - out[2][i0])
        S = np.where(np.arange(u.size) > idx[k], S, 0.0)
        C = tau + p.varphi + outflow[k]
        out[k], flux[k] = type_cdf(y, S, C, g, idx[k])
    return u, Fu, out, flux


def solve_distributions(x, x_e, q_min, p: Primitives, q_bar_guess: float = 1.0,
                        phi_guess=None, q_bar: float | None = None,
                        tol: float = 1e-11, max_iter: int = 500,
                        n_log: int = LOG_NODES, entry_gap=None,
                        grid_q_bar: float | None = None) -> DistributionSet:
    """Stationary distributions for given innovation rates and thresholds.

    The active shares (which move the spillover share, the step average, the
    destruction rates and growth) are found by fixed-point iteration. When
    ``q_bar`` is None the productivity scale is pinned by the normalization of
    the price index, ``q_bar**(eps-1) * sum_k int u**(eps-1) dF_k = target``.

    The log grid is placed relative to ``grid_q_bar`` (default: ``q_bar`` or
    ``q_bar_guess``). Callers that solve repeatedly inside a root finder
    should hold it fixed so that the discretization does not move with the
    warm start.

    ``entry_gap(x_e, phi)``, if given, makes the entry rate an unknown as
    well (``x_e`` is then its starting value) and adds the condition
    ``entry_gap == 0``; the solved rate is stored on the result.
    """
    for span in (3.0, 12.0, 48.0):
        try:
            return _solve_distributions(x, x_e, q_min, p, q_bar_guess, phi_guess, q_bar, tol,
                                        max_iter, n_log, entry_gap, span, grid_q_bar)
        except GridCoverageError as exc:
            # the scale or the step average moved far from the guess: widen the grid
            err = exc
    raise err


def _solve_distributions(x, x_e, q_min, p, q_bar_guess, phi_guess, q_bar, tol, max_iter,
                         n_log, entry_gap, span, grid_q_bar) -> DistributionSet:
    x = np.asarray(x, dtype=float)
    q_min = np.asarray(q_min, dtype=float)
    if np.any(x < 0) or x_e < 0:
        raise DistributionError("innovation rates must be nonnegative")
    P = entry_type_probabilities(p)
    if x_e <= 0 and np.all(x <= 0):
        raise DegenerateEconomyError("no innovation and no entry: all mass exits")
    eps = p.epsilon
    target = (eps / (eps - 1.0)) ** (eps - 1.0)

    phi = np.array([0.5, 0.05, 0.005]) if phi_guess is None else np.asarray(phi_guess, float)
    phi = np.maximum(phi, 1e-12)

    # the grid lives in q-space so that moving the scale shifts it rigidly;
    # a zero threshold (never-exit) is replaced by a node far below the bulk
    if grid_q_bar is not None:
        qb_ref = float(grid_q_bar)
    else:
        qb_ref = float(q_bar) if q_bar is not None else float(q_bar_guess)
    q_floor = np.where(q_min > 0, q_min, 1e-4 * qb_ref)
    q_lo = min(1e-3 * qb_ref, 0.5 * float(np.min(q_floor)))
    q_hi = span * qb_ref * (overall_interpolant(p.eta).top + p.eta)
    y_q = _log_grid(q_lo, q_hi, q_floor, n_log)

    def shares_given(phi_in, qb, x_e=x_e):
        xi = spillover_share(*phi_in, p.varsigma)
        zeta = economy_step_average(*phi_in, xi, p)
        tau_type = phi_in * x + P * x_e
        tau = float(tau_type.sum())
        if tau <= 0:
            raise DegenerateEconomyError("zero creative destruction")
        g = tau * zeta
        Fo = overall_interpolant(zeta)
        if np.exp(y_q[-1]) / qb < Fo.top + zeta:
            raise GridCoverageError("productivity grid does not cover the distribution")
        u_min = q_floor / qb
        u, Fu, Ft, flux = _solve_types(y_q - np.log(qb), u_min, tau_type, tau, g, zeta, Fo, p)
        return Ft[:, -1].copy(), (xi, zeta, tau_type, Fo, u_min, u, Fu, Ft, flux)

    def log_pin(qb, phi_in, xe=x_e):
        phi_out, parts = shares_given(phi_in, qb, xe)
        u, Ft = parts[5], parts[7]
        M = 0.0
        w = u ** (eps - 1.0)
        for k in range(3):
            M += np.sum(0.5 * (w[1:] + w[:-1]) * np.diff(Ft[k]))
        if M <= 0:
            return -np.inf, phi_out, parts
        return (eps - 1.0) * np.log(qb) + np.log(M) - np.log(target), phi_out, parts

    fixed_scale = q_bar is not None
    qb0 = float(q_bar) if fixed_scale else float(q_bar_guess)

    free_entry = entry_gap is not None
    if free_entry and x_e <= 0:
        raise DistributionError("a free entry rate needs a positive starting value")

    def residual(z):
        ph = np.maximum(z[:3], 0.0)
        xe = float(np.exp(z[-1])) if free_entry else x_e
        if fixed_scale:
            phi_out, parts = shares_given(ph, qb0, xe)
            r = phi_out - ph
        else:
            r_pin, phi_out, parts = log_pin(np.exp(z[3]), ph, xe)
            r = np.concatenate([phi_out - ph, [r_pin]])
        if free_entry:
            r = np.concatenate([r, [entry_gap(xe, phi_out)]])
        return r, parts

    # a few plain iterations to get into the basin, then a quasi-Newton solve
    warm = phi_guess is not None
    z = phi.copy() if fixed_scale else np.concatenate([phi, [np.log(qb0)]])
    if free_entry:
        if not warm:
            raise DistributionError("a free entry rate needs warm-started shares")
        z = np.concatenate([z, [np.log(x_e)]])
    if not fixed_scale and not warm:
        z[3] = np.log(_pin_scale(lambda s: log_pin(s, phi)[0], qb0))
    for _ in range(0 if warm else 3):
        r, _p = residual(z)
        z[:3] = np.maximum(z[:3] + r[:3], 1e-12)
        if not fixed_scale:
            z[3] = np.log(_pin_scale(lambda s: log_pin(s, z[:3])[0], np.exp(z[3])))
    opts = {"xtol": 1e-15}
    if free_entry:
        opts["maxfev"] = 60   # callers fall back to a root search on the entry rate
    sol = root(lambda v: residual(v)[0], z, method="hybr", options=opts)
    r, parts = residual(sol.x)
    if not np.all(np.isfinite(r)) or np.max(np.abs(r)) > tol:
        if free_entry:
            raise DistributionError(
                f"entry condition not met (residual {np.max(np.abs(r)):.3e})")
        # fall back to damped iteration from the best point
        z = sol.x if np.all(np.isfinite(r)) else z
        for _ in range(max_iter):
            r, parts = residual(z)
            z[:3] = np.maximum(z[:3] + r[:3], 0.0)
            if not fixed_scale:
                z[3] = np.log(_pin_scale(lambda s: log_pin(s, z[:3])[0], np.exp(z[3])))
            if np.max(np.abs(r)) < tol:
                break
        else:
            raise DistributionError(
                f"active-share iteration did not converge (residual {np.max(np.abs(r)):.3e})")
        r, parts = residual(z)
        sol_x = z
    else:
        sol_x = sol.x
    qb = qb0 if fixed_scale else float(np.exp(sol_x[3]))
    xi, zeta, tau_type, Fo, u_min, u, Fu, Ft, flux = parts
    phi = Ft[:, -1].copy()
    if np.sum(phi) > 1 + 1e-9:
        raise DistributionError("active mass exceeds one")
    return DistributionSet(u=u, F=Fu, F_type=Ft, phi=phi, q_bar=qb, tau_type=tau_type,
                           xi=xi, zeta=zeta, u_min=u_min, flux=flux,
                           overall=Fo,
                           x_e=float(np.exp(sol_x[-1])) if free_entry else float(x_e))


def _pin_scale(fun, guess):
    lo, hi = guess / 1.5, guess * 1.5
    flo, fhi = fun(lo), fun(hi)
    for _ in range(60):
        if flo < 0 < fhi:
            break
        if flo >= 0:
            hi, fhi = lo, flo
            lo /= 2.0
            flo = fun(lo)
        else:
            lo, flo = hi, fhi
            hi *= 2.0
            fhi = fun(hi)
    else:
        raise DistributionError("could not bracket the productivity scale")
    return brentq(fun, lo, hi, xtol=1e-14, rtol=1e-13)


def flow_balance(dist: DistributionSet, x, x_e, p: Primitives) -> np.ndarray:
    """Per-type inflow minus outflow, with exit flux from one-sided differences.

    Inflows: innovations landing above the threshold plus (for applied-low)
    transitions of surviving lines. Outflows: destruction, transitions and
    the flux of lines drifting through the threshold, ``g u_k f_k(u_k)``.
    """
    g = dist.g
    res = np.zeros(3)
    outflow = (0.0, p.nu, p.mu)
    y = np.log(dist.u)
    for k in range(3):
        i = int(np.searchsorted(y, np.log(dist.u_min[k]) - 1e-12))
        d1, d2 = y[i + 1] - y[i], y[i + 2] - y[i]
        f0, f1, f2 = dist.F_type[k, i:i + 3]
        # second-order one-sided derivative in log u
        dF = (-(d1 + d2) / (d1 * d2) * f0 + d2 / (d1 * (d2 - d1)) * f1
              - d1 / (d2 * (d2 - d1)) * f2)
        exit_flux = g * dF
        Fd_top = 1.0
        Fd_k = dist.overall(dist.u_min[k] - dist.zeta)
        inflow = dist.tau_type[k] * (Fd_top - Fd_k)
        if k == 0:
            for j, rate in ((1, p.nu), (2, p.mu)):
                above = dist.phi[j] - np.interp(np.log(dist.u_min[0]), y, dist.F_type[j])
                inflow += rate * above
        out = (dist.tau + p.varphi + outflow[k]) * dist.phi[k] + exit_flux
        res[k] = inflow - out
    return res


def labor_pin_residual(dist: DistributionSet, p: Primitives) -> float:
    """Relative error of the price-index normalization at the solved scale."""
    eps = p.epsilon
    q = dist.q
    w = q ** (eps - 1.0)
    M = sum(np.sum(0.5 * (w[1:] + w[:-1]) * np.diff(dist.F_type[k])) for k in range(3))
    return float(M / (eps / (eps - 1.0)) ** (eps - 1.0) - 1.0)
