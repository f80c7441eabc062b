"""Command-line entry point.

    rdgrowth {solve,subsidy,planner,oracle,sweep,tables} [--config PATH]
             [--out DIR] [--seed N] [--workers N] [--tolerance X]

Exit status 0 on success; otherwise a one-line JSON error record is written
to stderr and the status is nonzero.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentSpec, load_spec
from .equilibrium import EquilibriumError, solve_equilibrium, table_row
from .montecarlo import compare_to_analytic, simulate_panel
from .output import (
    write_manifest,
    write_plot_script,
    write_raw,
    write_records,
    write_table,
    write_timings,
)
from .policy import PlannerError, net_welfare, optimize_planner
from .policyspec import PolicyKind, PolicySpec
from .primitives import ConfigError, ModelError, ResearchType
from .values import value

SUBCOMMANDS = ("solve", "subsidy", "planner", "oracle", "sweep", "tables")

EXIT_CONFIG, EXIT_SOLVER, EXIT_PLANNER, EXIT_OTHER = 2, 3, 4, 1


class Run:
    """Collects written files and timings for the manifest."""

    def __init__(self, spec: ExperimentSpec, out: Path, workers: int):
        self.spec = spec
        self.out = out
        self.workers = max(1, workers)
        self.files: list[Path] = []
        self.timings: dict = {}
        self.hash = spec.config_hash()
        self._base = None

    def path(self, name: str) -> Path:
        p = self.out / name
        self.files.append(p)
        return p

    def timed(self, label, fn, *a, **k):
        t0 = time.perf_counter()
        res = fn(*a, **k)
        self.timings[label] = self.timings.get(label, 0.0) + time.perf_counter() - t0
        return res

    def baseline(self, p=None):
        if p is None or p == self.spec.primitives:
            if self._base is None:
                self._base = self.timed("baseline", solve_equilibrium, self.spec.primitives,
                                        tol=self.spec.tolerance)
            return self._base
        return self.timed("baseline", solve_equilibrium, p, tol=self.spec.tolerance)


def _policy(targets: str, budget: float) -> PolicySpec:
    return PolicySpec(PolicyKind.INCUMBENT_SUBSIDY, targets, 0.0, budget)


def _raw(state, reference=None) -> dict:
    row = {k: v / 100.0 if k != "welfare" else v
           for k, v in table_row(state, reference).items()}
    row.update(w_s=state.w_s, q_bar=state.q_bar, r=state.r, xi=state.xi, zeta=state.zeta,
               phi_np=state.phi_np, s_inc=state.policy.s_inc,
               subsidy_cost=state.subsidy_cost, E_al=state.expected_values[0],
               E_ah=state.expected_values[1], E_b=state.expected_values[2],
               residual=state.residual)
    return row


def _emit(run: Run, stem: str, rows):
    """rows: list of (label, state, reference)."""
    write_table(run.path(f"{stem}.csv"),
                [(lab, table_row(st, ref)) for lab, st, ref in rows], run.hash)
    write_raw(run.path(f"{stem}_raw.csv"),
              [(lab, _raw(st, ref)) for lab, st, ref in rows], run.hash)


def cmd_solve(run: Run):
    base = run.baseline()
    _emit(run, "equilibrium", [("market", base, base)])
    base.dist.to_csv(run.path("distribution.csv"), f"schema=rdgrowth.distribution.v1 "
                     f"config_sha256={run.hash}")
    write_records(run.path("thresholds.csv"), ["q_al_min", "q_ah_min", "q_b_min"],
                  [tuple(float(v) for v in base.q_min)], run.hash, "rdgrowth.thresholds.v1")
    env = base.environment()
    q = base.dist.q
    q = q[(q > 0.05 * base.q_bar) & (q < 5 * base.q_bar)]
    curves = [value(q, k, env, base.primitives) for k in ResearchType]
    write_records(run.path("value_curves.csv"), ["q_hat", "V_al", "V_ah", "V_b"],
                  [(float(q[i]), *(float(c[i]) for c in curves)) for i in range(q.size)],
                  run.hash, "rdgrowth.values.v1")
    run.files.append(write_plot_script(run.out))


def cmd_subsidy(run: Run):
    base = run.baseline()
    cfg = run.spec.policy
    res = run.timed("subsidy", net_welfare, _policy(cfg.targets, cfg.budget_share),
                    run.spec.primitives, baseline=base)
    _emit(run, "subsidy", [("market", base, base), (f"subsidy_{cfg.targets}", res.state, base)])


def _subsidy_rows(run: Run, budget: float):
    base = run.baseline()
    rows = [("market", base, base)]
    for t in ("all", "applied", "basic"):
        res = run.timed("subsidy", net_welfare, _policy(t, budget), run.spec.primitives,
                        baseline=base)
        rows.append((f"subsidy_{t}", res.state, base))
    return rows


def _planner_rows(run: Run, trace_name: str):
    spec = run.spec
    base = run.baseline()
    pc = spec.planner
    opts = dict(n_starts=pc.n_starts, max_evals=pc.max_evals, xatol=pc.xatol, seed=spec.seed)
    plan = run.timed("planner", optimize_planner, spec.primitives, baseline=base, **opts)
    sub = net_welfare(_policy(pc.subsidy_targets, pc.subsidy_budget), spec.primitives,
                      baseline=base)
    plan_sub = run.timed("planner", optimize_planner, spec.primitives, sub.policy,
                         baseline=base, start_state=sub.state, **opts)
    recs = [("none", *t) for t in plan.trace] + [("subsidy", *t) for t in plan_sub.trace]
    write_records(run.path(trace_name),
                  ["case", "start", "evaluation", "x_al", "x_ah", "x_b", "q_al_min",
                   "q_ah_min", "q_b_min", "welfare"], recs, run.hash, "rdgrowth.trace.v1")
    return [("market", base, base), ("planner", plan.state, base),
            (f"market_subsidy_{pc.subsidy_targets}", sub.state, base),
            (f"planner_subsidy_{pc.subsidy_targets}", plan_sub.state, base)]


def cmd_planner(run: Run):
    _emit(run, "planner", _planner_rows(run, "planner_trace.csv"))


def cmd_oracle(run: Run):
    base = run.baseline()
    oc = run.spec.oracle
    stats = run.timed("oracle", simulate_panel, base, oc.n_lines, oc.horizon, oc.dt,
                      run.spec.seed, step_rule=oc.step_rule)
    rep = compare_to_analytic(stats, base, share_tol_pp=oc.share_tol_pp, ks_tol=oc.ks_tol,
                              growth_rel_tol=oc.growth_rel_tol)
    recs = []
    for k in ResearchType:
        recs.append((f"phi_{k.label}", float(base.phi[k]), float(stats.phi_hat[k]),
                     float(rep.share_delta_pp[k]), "shares", rep.checks["shares"]))
        recs.append((f"ks_{k.label}", 0.0, float(rep.ks[k]), float(rep.ks[k]), "ks",
                     rep.checks["ks"]))
    g = base.tau * base.zeta
    recs.append(("growth", g, stats.growth_emp, rep.growth_rel_delta, "growth",
                 rep.checks["growth"]))
    write_records(run.path("oracle.csv"),
                  ["statistic", "analytic", "empirical", "delta", "check", "passed"],
                  recs, run.hash, "rdgrowth.oracle.v1")
    stats.to_csv(run.path("panel_stats.csv"), f"schema=rdgrowth.panel.v1 "
                 f"config_sha256={run.hash}")
    return 0 if rep.passed else EXIT_OTHER


def _sweep_point(args):
    prim, tol, targets, budget = args
    base = solve_equilibrium(prim, tol=tol)
    if budget == 0:
        return base, base
    res = net_welfare(_policy(targets, budget), prim, baseline=base)
    return res.state, base


def cmd_sweep(run: Run):
    sc = run.spec.sweep
    points = [(t, b) for t in sc.targets for b in sc.budgets]
    args = [(run.spec.primitives, run.spec.tolerance, t, b) for t, b in points]
    if run.workers > 1:
        with ProcessPoolExecutor(max_workers=run.workers) as ex:
            results = run.timed("sweep", lambda: list(ex.map(_sweep_point, args)))
    else:
        results = run.timed("sweep", lambda: [_sweep_point(a) for a in args])
    rows = [(f"{t}_{b:g}", st, base) for (t, b), (st, base) in zip(points, results)]
    _emit(run, "sweep", rows)


def cmd_tables(run: Run):
    spec = run.spec
    base = run.baseline()
    _emit(run, "market_table", [("market", base, base)])
    _emit(run, "subsidy_table", _subsidy_rows(run, spec.policy.budget_share))
    _emit(run, "planner_table", _planner_rows(run, "planner_table_trace.csv"))
    strong = dataclasses.replace(spec.primitives, varsigma=spec.spillover_varsigma)
    base_s = run.baseline(strong)
    res = run.timed("subsidy", net_welfare, _policy("basic", spec.policy.budget_share), strong,
                    baseline=base_s)
    _emit(run, "spillover_table",
          [("market", base_s, base_s), ("subsidy_basic", res.state, base_s)])


COMMANDS = {"solve": cmd_solve, "subsidy": cmd_subsidy, "planner": cmd_planner,
            "oracle": cmd_oracle, "sweep": cmd_sweep, "tables": cmd_tables}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rdgrowth", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, default=None, help="YAML experiment file")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    ap.add_argument("--workers", type=int, default=1, help="concurrent sweep points")
    ap.add_argument("--tolerance", type=float, default=None,
                    help="fixed-point tolerance (overrides the config)")
    return ap


def _fail(code: int, kind: str, msg: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": msg}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_spec(args.config)
        changes = {}
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed: must be a nonnegative integer")
            changes["seed"] = args.seed
        if args.tolerance is not None:
            if not 0 < args.tolerance < 1e-3:
                raise ConfigError("tolerance: must be a number in (0, 1e-3)")
            changes["tolerance"] = args.tolerance
        spec = dataclasses.replace(spec, **changes)
        if args.workers < 1:
            raise ConfigError("workers: must be at least 1")
        args.out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except OSError as exc:
        return _fail(EXIT_CONFIG, "config", f"out: {exc}")
    run = Run(spec, args.out, args.workers)
    try:
        # trial points inside the root finders may overflow; results are checked
        with np.errstate(all="ignore"):
            status = COMMANDS[args.command](run) or 0
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except PlannerError as exc:
        return _fail(EXIT_PLANNER, "planner", str(exc))
    except EquilibriumError as exc:
        hist = exc.history[-5:] if exc.history else []
        return _fail(EXIT_SOLVER, "solver", f"{exc}; last residuals {hist}")
    except ModelError as exc:
        return _fail(EXIT_SOLVER, "model", str(exc))
    write_manifest(run.out, spec, args.command, run.files)
    write_timings(run.out, run.timings)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
