"""Discrete-time Monte Carlo panel of product lines.

Each line carries an absolute productivity and a type (or is inactive). Per
step of length ``dt`` an active line of type ``k`` innovates with probability
``x_k dt``, is destroyed exogenously with probability ``varphi dt`` and, for
applied-high and basic lines, cools down to applied-low with probability
``nu dt`` / ``mu dt``. Entrants innovate at ``x_e dt`` per line of the economy.
Every innovation lands on a uniformly drawn line (active or not), raises its
productivity by ``step * mean(q)`` and hands it to the innovator's type.
Relative productivity is ``q_bar * q / mean(q)``; lines at or below their
type's threshold become inactive.

Per step and type the numbers of innovating, destroyed and cooling lines are
drawn jointly (multinomial over the active lines of that type) and then
assigned to distinct lines at random. This has the same law as giving every
line its own uniform draw against the cumulative event probabilities.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numba
import numpy as np

from .equilibrium import EquilibriumState
from .primitives import ModelError, entry_type_probabilities, innovation_steps

INACTIVE = -1


class PreconditionError(ModelError):
    pass


@dataclass
class PanelStats:
    phi_hat: np.ndarray                  # time-averaged active shares
    phi_np_hat: float
    q_bar_hat_emp: float                 # mean relative productivity (by construction q_bar)
    growth_emp: float                    # drift of log mean productivity
    samples: list = field(repr=False)    # per-type pooled relative productivities
    innovations: int = 0
    replaced: int = 0
    n_lines: int = 0
    horizon: float = 0.0
    dt: float = 0.0
    seed: int = 0

    def ecdf(self, k: int):
        """Sorted sample and its empirical CDF levels for type ``k``."""
        s = np.sort(self.samples[k])
        return s, np.arange(1, s.size + 1) / max(s.size, 1)

    def to_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["statistic", "value"])
            for name, v in (("phi_al", self.phi_hat[0]), ("phi_ah", self.phi_hat[1]),
                            ("phi_b", self.phi_hat[2]), ("phi_np", self.phi_np_hat),
                            ("q_bar_emp", self.q_bar_hat_emp), ("growth_emp", self.growth_emp),
                            ("innovations", self.innovations), ("replaced", self.replaced),
                            ("n_lines", self.n_lines), ("horizon", self.horizon),
                            ("dt", self.dt), ("seed", self.seed)):
                w.writerow([name, repr(float(v))])


@numba.njit(cache=True)
def _exit_and_sort(q, typ, q_min, scale, order, counts):
    """Retire lines at or below their threshold and bucket active lines by type.

    On return ``order[starts[k]:starts[k] + counts[k]]`` lists the active
    lines of type ``k``.
    """
    counts[:] = 0
    for i in range(q.size):
        k = typ[i]
        if k >= 0:
            if q[i] * scale <= q_min[k]:
                typ[i] = -1
            else:
                counts[k] += 1
    starts = np.zeros(3, np.int64)
    starts[1] = counts[0]
    starts[2] = counts[0] + counts[1]
    fill = starts.copy()
    for i in range(q.size):
        k = typ[i]
        if k >= 0:
            order[fill[k]] = i
            fill[k] += 1
    return starts


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; the integer seed fully determines the stream."""
    return np.random.Generator(np.random.Philox(int(seed)))


def simulate_panel(state: EquilibriumState, n_lines: int = 100_000, horizon: float = 200.0,
                   dt: float = 0.01, seed: int = 0, *, step_rule: str = "pooled",
                   burn_in: float = 0.5, sample_every: float = 1.0,
                   rates: dict | None = None) -> PanelStats:
    """Simulate the firm panel implied by ``state``.

    ``step_rule="pooled"`` moves every innovation by the economy step average
    (the rule the stationary distribution equations are written for);
    ``"by_type"`` uses each innovator's own step. Statistics are averaged over
    the part of the horizon after ``burn_in`` (a fraction). ``rates`` may
    override ``x``, ``x_e``, ``q_min``, ``q_bar``, ``zeta``, ``xi`` (used for
    degenerate test economies).
    """
    p = state.primitives
    r = dict(x=np.asarray(state.x, float), x_e=float(state.x_e),
             q_min=np.asarray(state.q_min, float), q_bar=float(state.q_bar),
             zeta=float(state.zeta), xi=float(state.xi))
    if rates:
        r.update({k: (np.asarray(v, float) if np.ndim(v) else float(v)) for k, v in rates.items()})
    x, x_e, q_min, q_bar = r["x"], r["x_e"], r["q_min"], r["q_bar"]
    outflow = np.array([0.0, p.nu, p.mu])
    probs = np.concatenate([x, [x_e], outflow, [p.varphi]]) * dt
    if np.any(probs >= 0.1) or np.any(x * dt + p.varphi * dt + outflow * dt >= 0.1):
        raise PreconditionError("dt too large: per-step probabilities must stay below 0.1")
    if n_lines < 1 or horizon <= 0 or dt <= 0:
        raise PreconditionError("n_lines, horizon and dt must be positive")
    if step_rule == "pooled":
        steps = np.full(3, r["zeta"])
    elif step_rule == "by_type":
        steps = innovation_steps(r["xi"], p)
    else:
        raise PreconditionError(f"unknown step rule {step_rule!r}")

    rng = make_rng(seed)
    P = entry_type_probabilities(p)
    n_steps = int(round(horizon / dt))
    start = int(n_steps * burn_in)
    every = max(1, int(round(sample_every / dt)))

    q = np.ones(n_lines)
    typ = rng.choice(3, size=n_lines, p=P).astype(np.int8)
    # per-type event probabilities: innovate, destroyed, cool down, nothing
    event_p = [np.array([x[k] * dt, p.varphi * dt, outflow[k] * dt,
                         1.0 - (x[k] + p.varphi + outflow[k]) * dt]) for k in range(3)]
    order = np.empty(n_lines, np.int64)
    counts = np.zeros(3, np.int64)

    share_acc = np.zeros(3)
    n_acc = 0
    samples = [[], [], []]
    log_mean = []
    times = []
    innovations = replaced = 0

    for step in range(n_steps):
        mean_q = q.mean()
        # endogenous exit at the current relative productivity
        starts = _exit_and_sort(q, typ, q_min, q_bar / mean_q, order, counts)
        innov, destroy, move = [], [], []
        for k in range(3):
            if counts[k] == 0:
                continue
            n_i, n_d, n_m, _ = rng.multinomial(counts[k], event_p[k])
            m = n_i + n_d + n_m
            if m == 0:
                continue
            pick = order[starts[k] + rng.choice(counts[k], size=m, replace=False)]
            innov.append(pick[:n_i])
            destroy.append(pick[n_i:n_i + n_d])
            move.append(pick[n_i + n_d:])
        innov = np.concatenate(innov) if innov else np.empty(0, np.int64)
        destroy = np.concatenate(destroy) if destroy else np.empty(0, np.int64)
        move = np.concatenate(move) if move else np.empty(0, np.int64)

        inc_types = typ[innov]
        n_ent = rng.binomial(n_lines, x_e * dt) if x_e > 0 else 0
        ent_types = rng.choice(3, size=n_ent, p=P).astype(np.int8) if n_ent else \
            np.empty(0, np.int8)
        new_types = np.concatenate([inc_types, ent_types])
        n_new = new_types.size

        typ[destroy] = INACTIVE
        typ[move] = 0
        if n_new:
            targets = rng.choice(n_lines, size=n_new, replace=False)
            q[targets] += steps[new_types] * mean_q
            typ[targets] = new_types
            innovations += n_new
            replaced += targets.size

        if step >= start:
            log_mean.append(np.log(q.mean()))
            times.append((step + 1) * dt)
            if (step - start) % every == 0:
                share_acc += np.bincount(typ[typ >= 0], minlength=3) / n_lines
                n_acc += 1
                qh = q * (q_bar / q.mean())
                for k in range(3):
                    samples[k].append(qh[typ == k])

    phi_hat = share_acc / max(n_acc, 1)
    growth = float(np.polyfit(np.asarray(times), np.asarray(log_mean), 1)[0]) \
        if len(times) > 1 else 0.0
    return PanelStats(phi_hat=phi_hat, phi_np_hat=1.0 - float(phi_hat.sum()),
                      q_bar_hat_emp=float(np.mean(q * (q_bar / q.mean()))),
                      growth_emp=growth,
                      samples=[np.concatenate(s) if s else np.empty(0) for s in samples],
                      innovations=innovations, replaced=replaced, n_lines=n_lines,
                      horizon=horizon, dt=dt, seed=seed)


def type_cdf_on(state: EquilibriumState, k: int):
    """Normalized analytic CDF of type ``k`` as a callable in relative productivity."""
    d = state.dist
    Fk = d.F_type[k]
    tot = Fk[-1]
    if tot <= 0:
        return lambda v: np.zeros_like(np.asarray(v, float))
    q = d.q
    return lambda v: np.interp(np.asarray(v, float), q, Fk / tot, left=0.0, right=1.0)


def ks_distance(sample, cdf) -> float:
    """Two-sided Kolmogorov-Smirnov distance of ``sample`` from ``cdf``."""
    s = np.sort(np.asarray(sample, float))
    n = s.size
    if n == 0:
        return np.nan
    c = cdf(s)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - c), np.max(c - (i - 1) / n)))


def sample_from_type(state: EquilibriumState, k: int, n: int, seed: int = 0) -> np.ndarray:
    """Inverse-CDF draws from the analytic type-``k`` distribution."""
    d = state.dist
    Fk = d.F_type[k] / d.F_type[k][-1]
    keep = np.concatenate([[True], np.diff(Fk) > 0])
    u = make_rng(seed).random(n)
    return np.interp(u, Fk[keep], d.q[keep])


@dataclass
class OracleReport:
    share_delta_pp: np.ndarray
    ks: np.ndarray
    growth_rel_delta: float
    passed: bool
    checks: dict


def compare_to_analytic(stats: PanelStats, state: EquilibriumState, *,
                        share_tol_pp: float = 2.0, ks_tol: float = 0.03,
                        growth_rel_tol: float = 0.15) -> OracleReport:
    """Share deltas (percentage points), per-type KS distances and growth gap."""
    delta = 100.0 * (stats.phi_hat - state.phi)
    ks = np.array([ks_distance(stats.samples[k], type_cdf_on(state, k)) for k in range(3)])
    g = state.tau * state.zeta
    g_rel = (stats.growth_emp - g) / g if g > 0 else np.inf
    checks = {
        "shares": bool(np.all(np.abs(delta) <= share_tol_pp)),
        "ks": bool(np.all(np.nan_to_num(ks, nan=1.0) < ks_tol)),
        "growth": bool(abs(g_rel) <= growth_rel_tol),
    }
    return OracleReport(delta, ks, float(g_rel), all(checks.values()), checks)
