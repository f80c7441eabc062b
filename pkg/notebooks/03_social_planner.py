# %% [markdown]
# # Social planner
#
# The planner picks incumbent innovation rates and exit thresholds; prices,
# entry and wages still clear markets. The search is a multi-start
# Nelder-Mead over log controls, starting from the market allocation. The
# budget below is small for a quick look; the CLI default is 8 starts with
# 2000 evaluations each.

# %%
import sys

from rdgrowth import PolicySpec, Primitives, net_welfare, optimize_planner, solve_equilibrium
from rdgrowth import table_row

n_starts = int(sys.argv[1]) if len(sys.argv) > 1 else 1
max_evals = int(sys.argv[2]) if len(sys.argv) > 2 else 300

p = Primitives()
base = solve_equilibrium(p)
plan = optimize_planner(p, baseline=base, n_starts=n_starts, max_evals=max_evals)
sub = net_welfare(PolicySpec("incumbent_subsidy", "basic", budget_share=0.01), p,
                  baseline=base)
plan_sub = optimize_planner(p, sub.policy, baseline=base, start_state=sub.state,
                            n_starts=n_starts, max_evals=max_evals)

for label, st in (("market", base), ("planner", plan.state),
                  ("market + basic subsidy", sub.state),
                  ("planner + basic subsidy", plan_sub.state)):
    row = table_row(st, base)
    print(f"{label:>24}: welfare {row['welfare']:7.2f}  R&D labor {row['rd_labor_ratio']:6.2f}%"
          f"  phi_b {row['phi_b']:6.2f}%  g {row['g']:5.2f}%")

# %% [markdown]
# The planner keeps more lines active (lower thresholds) and shifts skilled
# labor into R&D; adding the basic subsidy on top raises welfare further.
