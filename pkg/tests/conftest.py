import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rdgrowth import NO_POLICY, Primitives, solve_equilibrium  # noqa: E402


@pytest.fixture(scope="session")
def prim():
    return Primitives()


@pytest.fixture(scope="session")
def baseline(prim):
    return solve_equilibrium(prim, NO_POLICY)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


@pytest.fixture(scope="session")
def policy_1pct(prim, baseline):
    """Net-welfare results for 1%-of-output budgets, keyed by target group."""
    from rdgrowth import PolicySpec, net_welfare

    import time

    out = {}
    for t in ("basic", "all", "applied"):
        t0 = time.perf_counter()
        out[t] = net_welfare(PolicySpec("incumbent_subsidy", t, budget_share=0.01), prim,
                             baseline=baseline)
        out[t].seconds = time.perf_counter() - t0
    return out
