"""Build a small multi-period portfolio instance, compile it to QUBO, and
compare all four classical solvers on it.

Run: python3 demos/01_build_and_solve.py
"""
import numpy as np

from qubofolio import (
    SolveBudget,
    build_qubo,
    decode_assignment,
    energy,
    solve_abs,
    solve_bnb,
    solve_exact,
    solve_sa,
    toy_spec,
)

spec = toy_spec(n=3, T=2, q=1e-5, seed=7)
lay = spec.layout
print(f"instance: n={spec.n} assets, T={spec.T} periods, k={spec.k} blocks, "
      f"B={spec.B}, C={spec.C}")
print(f"layout: {lay.total} binary variables "
      f"({lay.step_width} per period: {2 * lay.kn} trading, "
      f"{lay.nb} asset-slack, {lay.nc} cash-slack)")

qubo = build_qubo(spec)
print(f"penalty weight: {qubo.penalty_weight:.3e}\n")

exact = solve_exact(qubo)
print(f"exact   best={exact.best_energy:12.4f}  lb={exact.lower_bound:12.4f}")

bnb = solve_bnb(qubo, SolveBudget(time_limit=30))
print(f"bnb     best={bnb.best_energy:12.4f}  lb={bnb.lower_bound:12.4f}  "
      f"nodes={bnb.iterations}")

sa = solve_sa(qubo, SolveBudget(seed=1, max_iterations=100_000,
                                target_energy=exact.best_energy))
print(f"sa      best={sa.best_energy:12.4f}  iterations={sa.iterations}")

pooled = solve_abs(qubo, SolveBudget(seed=1, max_iterations=500,
                                     target_energy=exact.best_energy))
print(f"abs     best={pooled.best_energy:12.4f}  candidates={pooled.iterations}")

traj = decode_assignment(spec, exact.best)
print("\noptimal trajectory (net blocks per asset, one row per period):")
print(traj.net_position)
print(f"cash units per period: {traj.cash_units}")
