# %% [markdown]
# # Targeted R&D subsidies
#
# A subsidy worth 1% of output is given to all incumbents, to applied
# incumbents only, or to basic-research incumbents only. The rate is
# calibrated so that the equilibrium outlay meets the budget, and welfare is
# measured net of the outlay (consumption equivalent, market = 100).

# %%
from rdgrowth import PolicySpec, Primitives, net_welfare, solve_equilibrium, table_row

p = Primitives()
base = solve_equilibrium(p)
results = {t: net_welfare(PolicySpec("incumbent_subsidy", t, budget_share=0.01), p,
                          baseline=base) for t in ("all", "applied", "basic")}

cols = ("x_b", "phi_b", "q_b_min", "rd_labor_ratio", "tau", "g", "welfare")
print(f"{'':>8}" + "".join(f"{c:>15}" for c in cols) + f"{'rate':>8}")
print(f"{'market':>8}" + "".join(f"{table_row(base)[c]:15.2f}" for c in cols))
for t, r in results.items():
    row = table_row(r.state, base)
    print(f"{t:>8}" + "".join(f"{row[c]:15.2f}" for c in cols) + f"{r.policy.s_inc:8.3f}")

# %% [markdown]
# Subsidizing basic research wins: it slows creative destruction but raises
# the average step through spillovers. Subsidizing applied research raises
# the basic exit threshold.

# %%
# with a strong spillover weight the basic subsidy lifts every type's research
strong = p.replace(varsigma=20.0)
base_s = solve_equilibrium(strong)
res = net_welfare(PolicySpec("incumbent_subsidy", "basic", budget_share=0.01), strong,
                  baseline=base_s)
print("welfare", round(res.welfare_index, 2))
print("x before", base_s.x.round(4), "after", res.state.x.round(4))
