"""Sweep the risk-aversion weight q across the standard eight-value grid
and trace the risk/profit frontier, then inspect the economics of the
two extreme strategies.

Run: python3 demos/04_pareto_sweep.py
"""
import dataclasses

from qubofolio import SolveBudget, build_qubo, economic_metrics, solve_exact, sweep_q, toy_spec
from qubofolio.evaluation import DEFAULT_Q_GRID

spec = toy_spec(n=2, T=2, seed=3)
table = sweep_q(spec, DEFAULT_Q_GRID, "exact", SolveBudget(time_limit=60))

print(f"{'q':>8}  {'objective':>14}  {'profit':>12}  {'risk term':>14}")
for row in table.rows:
    print(f"{row.q:8.0e}  {row.objective:14.4f}  {row.profit:12.4f}  "
          f"{row.risk_term:14.4f}")

print("\nlow-q (profit-seeking) vs high-q (risk-averse) economics:")
for q in (0.0, 1e-2):
    q_spec = dataclasses.replace(spec, params=dataclasses.replace(spec.params, q=q))
    report = solve_exact(build_qubo(q_spec))
    m = economic_metrics(q_spec, report.best)
    sharpe = "no-risk" if m.sharpe_annualized is None else f"{m.sharpe_annualized:.3f}"
    print(f"  q={q:g}: net profit {m.net_profit:10.2f}, "
          f"transaction cost {m.total_transaction_cost:8.2f}, "
          f"interest {m.total_cash_interest:8.2f}, sharpe {sharpe}")
