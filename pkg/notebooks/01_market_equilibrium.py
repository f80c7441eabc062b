# %% [markdown]
# # Market equilibrium
#
# Solves the stationary market equilibrium under the default calibration and
# looks at its shape: who is active, where each type exits, and how the value
# of a product line grows with its relative productivity.
#
# Run as a script (`python notebooks/01_market_equilibrium.py`) or cell by cell.

# %%
import numpy as np

from rdgrowth import NO_POLICY, Primitives, ResearchType, solve_equilibrium, table_row, value

p = Primitives()
base = solve_equilibrium(p, NO_POLICY)
row = table_row(base)

# reference market row of the literature calibration (percent)
reference = dict(x_e=0.51, x_al=25.98, x_ah=38.32, x_b=14.43, phi_al=55.24, phi_ah=5.89,
                 phi_b=0.17, q_al_min=147.07, q_ah_min=129.86, q_b_min=155.15,
                 rd_labor_ratio=19.88, tau=17.14, g=2.27)

print(f"{'column':>15} {'model':>9} {'reference':>10} {'rel. gap':>9}")
for k, ref in reference.items():
    print(f"{k:>15} {row[k]:9.2f} {ref:10.2f} {(row[k] - ref) / ref:9.1%}")

# %% [markdown]
# Applied-low lines dominate the active mass and basic research is a fraction
# of a percent of it. Basic lines exit earliest (highest threshold), the
# applied-high type latest.

# %%
active = base.phi.sum()
print("active mass", round(active, 4), "inactive", round(base.phi_np, 4))
print("shares of active mass", np.round(base.phi / active, 4))
print("thresholds", dict(zip([k.label for k in ResearchType], np.round(base.q_min, 4))))

# %%
env = base.environment()
q = np.linspace(1.0, 4.0, 7)
for k in ResearchType:
    print(f"{k.label:>3}", np.round(value(q, k, env, p), 4))

# %% [markdown]
# The per-type stationary CDFs can be written out for plotting with
# `rdgrowth solve --out out/` (see `out/plot_distributions.py`).
