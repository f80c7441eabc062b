import numpy as np
import pytest

from rdgrowth import (
    NO_POLICY,
    ConfigError,
    PolicySpec,
    calibrate_subsidy_rate,
    net_welfare,
    planner_objective,
    rd_labor_demand,
    subsidy_cost,
)
from rdgrowth.policy import InfeasibleBudgetError, PlannerError, controls_of, optimize_planner


@pytest.mark.parametrize("kw, key", [
    (dict(s_inc=1.0), "s_inc"),
    (dict(s_inc=-0.1), "s_inc"),
    (dict(budget_share=-0.01), "budget_share"),
    (dict(targets="bogus"), "targets"),
    (dict(planner_controls=(1, 2, 3)), "planner_controls"),
    (dict(planner_controls=(0.1, 0.1, -0.1, 1, 1, 1)), "planner_controls"),
])
def test_policy_spec_validation(kw, key):
    with pytest.raises(ConfigError, match=key):
        PolicySpec(**kw)


def test_target_parsing():
    assert PolicySpec(targets="all").subsidy_mask().tolist() == [True, True, True]
    assert PolicySpec(targets="applied").subsidy_mask().tolist() == [True, True, False]
    assert PolicySpec(targets="b").subsidy_mask().tolist() == [False, False, True]
    assert PolicySpec(targets="al,ah").subsidy_mask().tolist() == [True, True, False]


def test_cost_is_zero_without_rate_or_targets(baseline):
    assert subsidy_cost(baseline) == 0.0
    assert subsidy_cost(baseline, PolicySpec("incumbent_subsidy", "basic", s_inc=0.0)) == 0.0
    assert subsidy_cost(baseline, PolicySpec("incumbent_subsidy", "none", s_inc=0.3)) == 0.0


def test_cost_identity(baseline, prim):
    pol = PolicySpec("incumbent_subsidy", "applied", s_inc=0.2)
    expected = 0.2 * baseline.w_s * sum(
        rd_labor_demand(baseline.x[k], prim.theta[k], prim.gamma) * baseline.phi[k]
        for k in (0, 1))
    assert subsidy_cost(baseline, pol) == pytest.approx(expected, rel=1e-14)


def test_zero_budget_is_no_policy(prim, baseline):
    s, st = calibrate_subsidy_rate(0.0, "basic", prim, baseline=baseline)
    assert s == 0.0 and st is baseline
    assert net_welfare(NO_POLICY, prim, baseline=baseline).welfare_index == 100.0
    with pytest.raises(InfeasibleBudgetError):
        calibrate_subsidy_rate(0.01, "none", prim, baseline=baseline)
    with pytest.raises(InfeasibleBudgetError):
        calibrate_subsidy_rate(1.0, "basic", prim, baseline=baseline)
    with pytest.raises(InfeasibleBudgetError):
        calibrate_subsidy_rate(0.05, "all", prim, baseline=baseline, s_max=0.1)


def test_calibration_meets_budget_and_is_monotone(prim, baseline):
    rates = []
    for budget in (0.0025, 0.005):
        s, st = calibrate_subsidy_rate(budget, "all", prim, baseline=baseline)
        assert abs(st.subsidy_cost - budget) < 1e-6
        assert st.policy.s_inc == s
        rates.append(s)
    assert 0 < rates[0] < rates[1]


def test_budget_calibration_at_one_percent(policy_1pct):
    for res in policy_1pct.values():
        assert abs(res.state.subsidy_cost - 0.01) < 1e-6
        assert 0 < res.policy.s_inc < 1


def test_directional_effects(policy_1pct, baseline):
    basic, applied = policy_1pct["basic"].state, policy_1pct["applied"].state
    # subsidizing applied research makes basic research harder to sustain
    assert applied.q_min[2] > baseline.q_min[2]
    assert applied.x[0] > baseline.x[0] and applied.x[1] > baseline.x[1]
    # subsidizing basic research expands it and slows creative destruction
    assert basic.phi[2] > baseline.phi[2] and basic.x[2] > baseline.x[2]
    assert basic.tau < baseline.tau
    assert basic.rd_labor_ratio > baseline.rd_labor_ratio


def test_planner_replicates_market(prim, baseline):
    val, st = planner_objective(controls_of(baseline), None, prim, baseline=baseline)
    assert val == pytest.approx(100.0, abs=1e-6)
    assert np.allclose(st.phi, baseline.phi, rtol=1e-6)
    assert st.x_e == pytest.approx(baseline.x_e, rel=1e-6)


def test_planner_rejects_bad_controls(prim, baseline):
    c = controls_of(baseline)
    assert planner_objective(c[:5], None, prim, baseline=baseline)[0] == -np.inf
    assert planner_objective(np.r_[c[:5], -1.0], None, prim, baseline=baseline)[0] == -np.inf
    # research so intense that skilled labor cannot cover it
    assert planner_objective(np.r_[50.0, 50.0, 50.0, c[3:]], None, prim,
                             baseline=baseline)[0] == -np.inf
    with pytest.raises(PlannerError):
        optimize_planner(prim, baseline=baseline, n_starts=0)


def test_short_planner_search_never_loses_to_market(prim, baseline):
    res = optimize_planner(prim, baseline=baseline, n_starts=1, max_evals=40)
    assert res.welfare_index >= 100.0 - 1e-9
    assert len(res.trace) >= 40 and res.starts[0][0] == 0
