"""Three-research-type Schumpeterian growth model: stationary equilibria,
R&D subsidy counterfactuals, a social planner and a Monte Carlo panel oracle.

Research types are indexed (applied-low, applied-high, basic) in every
per-type array.
"""
__version__ = "0.1.0"

from .primitives import (  # noqa: E402
    ConfigError,
    DegenerateEconomyError,
    DomainError,
    ModelError,
    Primitives,
    ResearchType,
    TYPES,
    applied_step,
    economy_step_average,
    entry_type_probabilities,
    load_primitives,
    profit_constant,
    rd_labor_demand,
    spillover_share,
    subsidized_capacity,
)
from .policyspec import NO_POLICY, PolicyKind, PolicySpec  # noqa: E402
from .values import (  # noqa: E402
    Environment,
    entrant_rate,
    exit_threshold,
    expected_innovation_value,
    optimal_innovation_rate,
    rd_option_value,
    value,
    value_applied_low,
    value_transitioning,
)
from .distributions import (  # noqa: E402
    DistributionSet,
    growth_rate,
    mean_relative_productivity,
    solve_distributions,
)
from .equilibrium import (  # noqa: E402
    EquilibriumState,
    WelfareReport,
    consumption_equivalent,
    interest_rate,
    skilled_labor_residual,
    solve_equilibrium,
    table_row,
    unskilled_wage,
    welfare,
    welfare_index,
)
from .policy import (  # noqa: E402
    calibrate_subsidy_rate,
    net_welfare,
    optimize_planner,
    planner_objective,
    subsidy_cost,
)
from .montecarlo import compare_to_analytic, simulate_panel  # noqa: E402
