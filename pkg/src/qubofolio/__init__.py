"""qubofolio: multi-period friction-aware portfolio optimization compiled
to QUBO/BQP/Ising, with classical solvers, a statevector quantum
simulator, and an evaluation harness.
"""

from .evaluation import (
    Metrics,
    ParetoRow,
    ParetoTable,
    economic_metrics,
    gap,
    sweep_q,
    tts,
)
from .market_data import (
    BlockPrices,
    CovarianceSeries,
    MarketDataError,
    PriceTable,
    estimate_covariance,
    load_prices,
    normalize_blocks,
    psd_repair,
)
from .model import (
    FrictionParams,
    ModelError,
    ProblemSpec,
    Trajectory,
    VariableLayout,
    constraint_residuals,
    decode_assignment,
    is_feasible,
    layout,
    spec_from_json,
    spec_to_json,
)
from .qubo import (
    BlockQubo,
    BqpView,
    IsingModel,
    QuboError,
    QuboParseError,
    SparseQubo,
    build_bqp,
    build_qubo,
    delta_energies,
    energy,
    ising_value,
    objective_breakdown,
    read_qubo_text,
    step_components,
    to_dense,
    to_ising,
    to_sparse,
    write_ising_text,
    write_qubo_text,
)
from .quantum import (
    AnnealSchedule,
    DiagonalCost,
    QaoaParams,
    QuantumSimError,
    anneal_run,
    diagonalize_cost,
    normalize_ising,
    qaoa_optimize,
    qaoa_run,
    vqe_run,
)
from .solvers import (
    PoolConfig,
    SolveBudget,
    SolveReport,
    local_descent,
    solve_abs,
    solve_bnb,
    solve_exact,
    solve_sa,
)
from .toy import cash_only_bits, random_sparse_qubo, synthetic_spec, toy_spec

__version__ = "0.1.0"
