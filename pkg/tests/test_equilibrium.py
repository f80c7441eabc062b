import pickle

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdgrowth import (
    NO_POLICY,
    Primitives,
    consumption_equivalent,
    interest_rate,
    skilled_labor_residual,
    solve_equilibrium,
    table_row,
    unskilled_wage,
    welfare,
    welfare_index,
)
from rdgrowth.equilibrium import (
    TABLE_COLUMNS,
    WelfareDivergence,
    skilled_labor_demand,
)
from rdgrowth.primitives import ModelError, rd_labor_demand
from rdgrowth.values import rd_option_value


def test_interest_rate_examples():
    p = Primitives(rho=0.02, vartheta=2.0)
    assert interest_rate(0.0, p) == 0.02
    assert interest_rate(0.0227, p) == pytest.approx(0.0654, abs=1e-12)
    assert interest_rate(0.03, p.replace(vartheta=1.0)) == pytest.approx(0.05)


def test_unskilled_wage_examples():
    assert unskilled_wage(1.0, Primitives(epsilon=2.0)) == 0.5
    assert unskilled_wage(1.0, Primitives(epsilon=1e6)) == pytest.approx(1.0, abs=1e-5)
    with pytest.raises(ModelError):
        unskilled_wage(0.0, Primitives())


def test_labor_demand_without_activity(prim):
    total, rd = skilled_labor_demand(np.zeros(3), 0.0, np.zeros(3), prim.theta, prim)
    assert total - prim.L_s == -prim.L_s and rd == 0.0


def test_baseline_identities(baseline, prim):
    st_ = baseline
    assert st_.residual < 1e-10
    assert st_.r == pytest.approx(prim.rho + prim.vartheta * st_.g, abs=1e-14)
    assert abs(skilled_labor_residual(st_)) < 1e-10
    total, rd = skilled_labor_demand(st_.x, st_.x_e, st_.phi, st_.theta_eff, prim)
    assert rd == pytest.approx(st_.rd_labor, rel=1e-12)
    assert st_.rd_labor_ratio == pytest.approx(st_.rd_labor / prim.L_s, rel=1e-12)


def test_option_values_round_trip(baseline, prim):
    # option value from the equilibrium rates equals the closed form from E
    for k in range(3):
        x = baseline.x[k]
        direct = x * baseline.expected_values[k] - baseline.w_s * rd_labor_demand(
            x, baseline.theta_eff[k], prim.gamma)
        closed = rd_option_value(baseline.expected_values[k], baseline.theta_eff[k],
                                 baseline.w_s, prim.gamma)
        assert direct == pytest.approx(closed, rel=1e-10)
        assert baseline.omega[k] == pytest.approx(closed, rel=1e-10)


def test_baseline_tracks_reference_shape(baseline):
    row = table_row(baseline)
    assert list(row) == list(TABLE_COLUMNS)
    assert row["welfare"] == pytest.approx(100.0, abs=1e-12)
    assert row["phi_b"] < 1.0 and row["g"] == pytest.approx(2.27, abs=0.5)
    assert row["rd_labor_ratio"] == pytest.approx(19.88, rel=0.3)


def test_solve_is_deterministic(baseline, prim):
    again = solve_equilibrium(prim, NO_POLICY)
    assert pickle.dumps(table_row(again)) == pickle.dumps(table_row(baseline))
    assert np.array_equal(again.dist.F, baseline.dist.F)


def test_without_basic_entry_basic_research_vanishes(prim):
    two = solve_equilibrium(prim.replace(alpha=0.0))
    assert two.phi[2] == 0.0 and two.xi == 0.0
    assert two.zeta == pytest.approx(prim.lam, rel=1e-14)
    assert two.g == pytest.approx(two.tau * prim.lam, rel=1e-12)
    # basic capacity is irrelevant once nothing enters as basic
    other = solve_equilibrium(prim.replace(alpha=0.0, theta_b=1e-3))
    assert np.allclose(other.phi, two.phi, rtol=1e-5, atol=0)
    assert np.allclose(other.x[:2], two.x[:2], rtol=1e-5)
    # and the three-type economy approaches it continuously
    near = solve_equilibrium(prim.replace(alpha=1e-6, theta_b=1e-3))
    assert near.phi[2] < 1e-7
    assert np.allclose(near.phi[:2], other.phi[:2], rtol=1e-6)
    assert near.g == pytest.approx(other.g, rel=1e-6)


def test_welfare_examples(prim):
    for th in (0.5, 1.0, 2.0):
        p = prim.replace(vartheta=th)
        assert welfare(0.0, 1.0, p).u0 == pytest.approx(0.0, abs=1e-12)
    lo, hi = welfare(0.01, 0.6, prim), welfare(0.02, 0.6, prim)
    assert hi.u0 > lo.u0
    with pytest.raises(WelfareDivergence):
        welfare(0.2, 0.6, prim.replace(vartheta=0.5, rho=0.05))


@given(th=st.floats(0.3, 3.0), g=st.floats(0.0, 0.04), g2=st.floats(0.0, 0.04),
       m=st.floats(0.3, 1.0), m2=st.floats(0.3, 1.0))
def test_consumption_equivalent_equates_utilities(th, g, g2, m, m2):
    p = Primitives(vartheta=th, rho=0.05)
    cand, ref = welfare(g, m, p), welfare(g2, m2, p)
    sigma = consumption_equivalent(cand, ref, p)
    # the candidate path scaled by sigma is worth exactly the reference
    scaled = welfare(g, m * sigma ** (p.epsilon - 1.0), p)
    assert scaled.u0 == pytest.approx(ref.u0, rel=1e-9, abs=1e-12)
    assert welfare_index(ref, ref, p) == pytest.approx(100.0, rel=1e-12)


def test_log_utility_branch_is_the_limit(prim):
    for th in (1.0 - 1e-7, 1.0 + 1e-7):
        p = prim.replace(vartheta=th)
        s = consumption_equivalent(welfare(0.03, 0.7, p), welfare(0.02, 0.6, p), p)
        s1 = consumption_equivalent(welfare(0.03, 0.7, prim.replace(vartheta=1.0)),
                                    welfare(0.02, 0.6, prim.replace(vartheta=1.0)),
                                    prim.replace(vartheta=1.0))
        assert s == pytest.approx(s1, rel=1e-5)
