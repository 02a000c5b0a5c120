"""Classical solution engines: exact enumeration, branch-and-bound,
simulated annealing, and adaptive pooled search.

All solvers consume either a BlockQubo or a SparseQubo and return a
SolveReport.  Randomized solvers are reproducible: per-worker RNG streams
are derived as ``seed XOR worker_id`` and pool merging uses a commutative
best-k ordered by (energy, bit-hash), so the reported best energy does not
depend on worker interleaving.  Operator adaptation and annealing
schedules are driven by deterministic work counts (bit flips) rather than
wall-clock time, so a run with a fixed ``max_iterations`` is bit-for-bit
repeatable; purely time-limited runs are only as repeatable as the clock.
"""
from __future__ import annotations

import hashlib
import heapq
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .qubo import (
    BlockQubo,
    QuboError,
    SparseQubo,
    apply_flip,
    delta_energies,
    dense_energies,
    energy,
    to_dense,
)

__all__ = [
    "SolveBudget",
    "SolveReport",
    "PoolConfig",
    "solve_exact",
    "solve_bnb",
    "solve_sa",
    "solve_abs",
    "local_descent",
    "rle_encode",
    "rle_decode",
]

EXACT_CAP = 26


@dataclass(frozen=True)
class SolveBudget:
    time_limit: float = 60.0
    max_iterations: int | None = None
    seed: int = 0
    target_energy: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class SolveReport:
    best: np.ndarray
    best_energy: float
    lower_bound: float | None
    trace: list[tuple[float, float]]  # (elapsed seconds, energy) improvement events
    tts: float
    iterations: int
    solver_name: str
    seed: int

    def to_json(self) -> dict:
        return {
            "solver": self.solver_name,
            "seed": self.seed,
            "best_energy": self.best_energy,
            "lower_bound": self.lower_bound,
            "tts_seconds": self.tts,
            "iterations": self.iterations,
            "trace": [[t, e] for t, e in self.trace],
            "bits": rle_encode(self.best),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SolveReport":
        return cls(
            best=rle_decode(doc["bits"]),
            best_energy=doc["best_energy"],
            lower_bound=doc.get("lower_bound"),
            trace=[tuple(ev) for ev in doc["trace"]],
            tts=doc["tts_seconds"],
            iterations=doc["iterations"],
            solver_name=doc["solver"],
            seed=doc["seed"],
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


@dataclass(frozen=True)
class PoolConfig:
    pool_size: int = 16
    operators: tuple[str, ...] = (
        "descent-restart",
        "tabu-flip",
        "uniform-crossover",
        "k-bit-mutation",
    )
    adaptation_halflife: float = 10.0
    dedupe: bool = True
    tabu_tenure: int | None = None  # default ceil(sqrt(num_vars))
    mutation_mean_bits: float = 3.0

    def __post_init__(self):
        if "uniform-crossover" in self.operators and self.pool_size < 2:
            raise ValueError("pool_size must be >= 2 when crossover is enabled")


def rle_encode(bits) -> str:
    """Run-length encode a 0/1 vector as e.g. ``0x5 1x3 0x2``."""
    x = np.asarray(bits, dtype=np.int8).ravel()
    if x.size == 0:
        return ""
    edges = np.flatnonzero(np.diff(x)) + 1
    starts = np.concatenate([[0], edges])
    ends = np.concatenate([edges, [x.size]])
    return " ".join(f"{x[s]}x{e - s}" for s, e in zip(starts, ends))


def rle_decode(text: str) -> np.ndarray:
    if not text:
        return np.zeros(0, dtype=np.int8)
    runs = []
    for token in text.split():
        bit, count = token.split("x")
        runs.append(np.full(int(count), int(bit), dtype=np.int8))
    return np.concatenate(runs)


def bit_hash(bits) -> int:
    """Deterministic 64-bit hash of an assignment; collisions treated as duplicates."""
    digest = hashlib.blake2b(np.ascontiguousarray(bits, dtype=np.int8).tobytes(),
                             digest_size=8).digest()
    return int.from_bytes(digest, "little")


# --- incremental-energy state adapters --------------------------------------


class _DenseState:
    """Single-owner assignment + delta cache over a dense symmetric matrix."""

    def __init__(self, A: np.ndarray, offset: float):
        self.A = A
        self.offset = offset
        self.num_vars = A.shape[0]

    def energy(self, x) -> float:
        return float(dense_energies(self.A, self.offset, np.asarray(x, float)[None, :])[0])

    def deltas(self, x) -> np.ndarray:
        xf = np.asarray(x, dtype=float)
        diag = np.diagonal(self.A)
        inner = diag + 2.0 * (self.A @ xf) - 2.0 * diag * xf
        return (1.0 - 2.0 * xf) * inner

    def flip(self, x: np.ndarray, deltas: np.ndarray, i: int) -> float:
        d = 1.0 - 2.0 * x[i]
        change = deltas[i]
        col = 2.0 * self.A[:, i] * d
        col[i] = 0.0
        deltas += (1.0 - 2.0 * x) * col
        x[i] ^= 1
        deltas[i] = -change
        return float(change)


class _BlockState:
    def __init__(self, qubo: BlockQubo):
        self.qubo = qubo
        self.num_vars = qubo.num_vars

    def energy(self, x) -> float:
        return energy(self.qubo, x)

    def deltas(self, x) -> np.ndarray:
        return delta_energies(self.qubo, x)

    def flip(self, x, deltas, i) -> float:
        return apply_flip(self.qubo, x, i, deltas)


def _as_state(qubo):
    if isinstance(qubo, BlockQubo):
        return _BlockState(qubo)
    if isinstance(qubo, SparseQubo):
        return _DenseState(*to_dense(qubo))
    raise QuboError(f"unsupported problem type {type(qubo).__name__}")


def _num_vars(qubo) -> int:
    return qubo.num_vars


# --- exact enumeration -------------------------------------------------------


def solve_exact(qubo, budget: SolveBudget | None = None) -> SolveReport:
    """Global minimum by chunked enumeration of all 2^n assignments."""
    budget = budget or SolveBudget()
    n = _num_vars(qubo)
    if n > EXACT_CAP:
        raise QuboError(f"solve_exact supports at most {EXACT_CAP} variables, got {n}")
    A, offset = to_dense(qubo)
    start = time.perf_counter()
    best_e = math.inf
    best_x = np.zeros(n, dtype=np.int8)
    trace: list[tuple[float, float]] = []
    chunk = 1 << 18
    total = 1 << n
    powers = np.arange(n, dtype=np.uint64)
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(lo + chunk, total), dtype=np.uint64)
        X = ((idx[:, None] >> powers) & 1).astype(np.int8)
        E = dense_energies(A, offset, X)
        j = int(np.argmin(E))
        if E[j] < best_e:
            best_e = float(E[j])
            best_x = X[j].copy()
            trace.append((time.perf_counter() - start, best_e))
    # canonical single-row evaluation: batched BLAS results vary at the
    # 1e-15 level with batch size, and reports must agree across solvers
    best_e = float(dense_energies(A, offset, best_x[None, :])[0])
    if trace:
        trace[-1] = (trace[-1][0], best_e)
    return SolveReport(
        best=best_x,
        best_energy=best_e,
        lower_bound=best_e,
        trace=trace,
        tts=trace[-1][0] if trace else 0.0,
        iterations=total,
        solver_name="exact",
        seed=budget.seed,
    )


# --- branch and bound --------------------------------------------------------

_LEAF_SIZE = 12  # subtrees at most this wide are enumerated outright


def _node_bound(A, offset, fixed, pg_iters=100):
    """Valid lower bound for the subproblem with partially fixed variables.

    The binary identity x^2 = x lets a uniform diagonal shift convexify the
    quadratic; projected gradient then descends the convex surrogate and the
    supporting hyperplane at the final iterate gives a certified bound over
    the box.  Returns (bound, relaxation point over free variables).
    """
    free = np.flatnonzero(fixed < 0)
    fx = np.flatnonzero(fixed > 0)
    const = offset
    if len(fx):
        const += float(A[np.ix_(fx, fx)].sum())
    Aff = A[np.ix_(free, free)]
    lin = np.diagonal(Aff).copy()
    if len(fx):
        lin += 2.0 * A[np.ix_(free, fx)].sum(axis=1)
    M = Aff - np.diag(np.diagonal(Aff))
    if len(free) == 0:
        return const, np.zeros(0)
    eigs = np.linalg.eigvalsh(M)
    shift = max(0.0, -float(eigs[0])) * 1.1 + 1e-12
    L = 2.0 * (float(eigs[-1]) + shift) + 1e-12
    lin_c = lin - shift
    y = np.full(len(free), 0.5)
    for _ in range(pg_iters):
        grad = 2.0 * (M @ y + shift * y) + lin_c
        y = np.clip(y - grad / L, 0.0, 1.0)
    val = float(y @ (M @ y) + shift * (y @ y) + lin_c @ y) + const
    grad = 2.0 * (M @ y + shift * y) + lin_c
    support = np.minimum((0.0 - y) * grad, (1.0 - y) * grad).sum()
    bound = val + float(support)
    return bound - 1e-9 * (1.0 + abs(bound)), y


def solve_bnb(qubo, budget: SolveBudget | None = None) -> SolveReport:
    """Best-bound-first branch and bound on the penalty (QUBO) form.

    Anytime: returns the incumbent at budget expiry; when the tree is
    exhausted the incumbent is proven optimal and lower_bound equals it.
    """
    budget = budget or SolveBudget()
    A, offset = to_dense(qubo)
    n = A.shape[0]
    start = time.perf_counter()
    trace: list[tuple[float, float]] = []

    def leaf_energies(fixed):
        free = np.flatnonzero(fixed < 0)
        X = np.repeat(np.clip(fixed, 0, 1)[None, :], 1 << len(free), axis=0).astype(np.int8)
        if len(free):
            idx = np.arange(1 << len(free), dtype=np.uint64)
            X[:, free] = ((idx[:, None] >> np.arange(len(free), dtype=np.uint64)) & 1)
        return X, dense_energies(A, offset, X)

    best_x = np.zeros(n, dtype=np.int8)
    best_e = float(dense_energies(A, offset, best_x[None, :])[0])
    state = _as_state(qubo if isinstance(qubo, (BlockQubo, SparseQubo)) else qubo)
    desc, desc_e, _ = _descend(state, best_x.copy())
    if desc_e < best_e:
        best_x, best_e = desc, desc_e
    trace.append((time.perf_counter() - start, best_e))

    root_fixed = np.full(n, -1, dtype=np.int8)
    root_bound, root_y = _node_bound(A, offset, root_fixed)
    counter = 0
    heap = [(root_bound, counter, root_fixed, root_y)]
    nodes = 0
    exhausted = True
    while heap:
        if time.perf_counter() - start > budget.time_limit or (
            budget.max_iterations is not None and nodes >= budget.max_iterations
        ):
            exhausted = False
            break
        bound, _, fixed, y = heapq.heappop(heap)
        nodes += 1
        if bound >= best_e:
            continue
        free = np.flatnonzero(fixed < 0)
        if len(free) <= _LEAF_SIZE:
            X, E = leaf_energies(fixed)
            j = int(np.argmin(E))
            if E[j] < best_e:
                best_e = float(E[j])
                best_x = X[j].copy()
                trace.append((time.perf_counter() - start, best_e))
            continue
        frac = np.abs(y - 0.5)
        branch_var = int(free[np.argmin(frac)])
        for value in (0, 1):
            child = fixed.copy()
            child[branch_var] = value
            child_bound, child_y = _node_bound(A, offset, child)
            if child_bound < best_e:
                counter += 1
                heapq.heappush(heap, (child_bound, counter, child, child_y))
    # canonical single-row evaluation so exhausted runs agree with solve_exact
    best_e = float(dense_energies(A, offset, best_x[None, :].astype(float))[0])
    if exhausted:
        lower = best_e
    else:
        lower = min([item[0] for item in heap] + [best_e])
    if trace:
        trace[-1] = (trace[-1][0], best_e)
    return SolveReport(
        best=best_x,
        best_energy=best_e,
        lower_bound=lower,
        trace=trace,
        tts=trace[-1][0],
        iterations=nodes,
        solver_name="bnb",
        seed=budget.seed,
    )


# --- local descent ------------------------------------------------------------


def _descend(state, x: np.ndarray, deltas: np.ndarray | None = None):
    """Steepest single-flip descent to a 1-flip local minimum.

    Returns (assignment, exact energy, flips performed); mutates x in place.
    """
    if deltas is None:
        deltas = state.deltas(x)
    flips = 0
    while True:
        i = int(np.argmin(deltas))
        if deltas[i] >= 0.0:
            break
        state.flip(x, deltas, i)
        flips += 1
    return x, state.energy(x), flips


def local_descent(qubo, bits) -> np.ndarray:
    """Steepest-descent refinement; the result has no improving single flip."""
    state = _as_state(qubo)
    x = np.asarray(bits, dtype=np.int8).copy()
    if x.shape[0] != state.num_vars:
        raise QuboError(f"assignment length {x.shape[0]} != num_vars {state.num_vars}")
    out, _, _ = _descend(state, x)
    return out


# --- simulated annealing --------------------------------------------------------


def solve_sa(qubo, budget: SolveBudget | None = None, schedule: dict | None = None) -> SolveReport:
    """Metropolis single-flip annealing with a geometric temperature schedule.

    T0 is auto-set to the 90th percentile of |delta| over a random sample
    unless overridden via ``schedule={"t0": ..., "t_final_ratio": ...}``.
    """
    budget = budget or SolveBudget()
    schedule = schedule or {}
    state = _as_state(qubo)
    n = state.num_vars
    start = time.perf_counter()
    best_e = math.inf
    best_x = None
    trace: list[tuple[float, float]] = []
    total_iters = 0
    default_iters = schedule.get("iterations", 200 * n)

    for wid in range(budget.workers):
        rng = np.random.default_rng(budget.seed ^ wid)
        x = rng.integers(0, 2, size=n).astype(np.int8)
        deltas = state.deltas(x)
        e = state.energy(x)
        t0 = schedule.get("t0") or max(float(np.percentile(np.abs(deltas), 90)), 1e-12)
        tf = t0 * schedule.get("t_final_ratio", 1e-3)
        max_it = budget.max_iterations or default_iters
        if e < best_e:
            best_e, best_x = e, x.copy()
            trace.append((time.perf_counter() - start, e))
        stop = False
        for it in range(max_it):
            total_iters += 1
            if it % 512 == 0 and time.perf_counter() - start > budget.time_limit:
                stop = True
                break
            temp = t0 * (tf / t0) ** (it / max(max_it - 1, 1))
            i = int(rng.integers(n))
            dE = deltas[i]
            if dE <= 0.0 or rng.random() < math.exp(-dE / temp):
                e += state.flip(x, deltas, i)
                if e < best_e:
                    best_e = e
                    best_x = x.copy()
                    trace.append((time.perf_counter() - start, e))
                    if budget.target_energy is not None and e <= budget.target_energy:
                        stop = True
                        break
        if stop and budget.target_energy is not None and best_e <= budget.target_energy:
            break
        if time.perf_counter() - start > budget.time_limit:
            break

    exact_best = state.energy(best_x)
    if trace:
        trace[-1] = (trace[-1][0], exact_best)
    return SolveReport(
        best=best_x,
        best_energy=exact_best,
        lower_bound=None,
        trace=trace,
        tts=trace[-1][0] if trace else 0.0,
        iterations=total_iters,
        solver_name="sa",
        seed=budget.seed,
    )


# --- adaptive pooled search ------------------------------------------------------


class _OperatorScores:
    """Exponentially decayed improvement-per-work scores driving softmax selection.

    Work is counted in bit flips; the half-life is converted from seconds
    using a nominal flip rate so that adaptation stays deterministic.
    """

    NOMINAL_FLIPS_PER_SECOND = 2000.0

    def __init__(self, operators: tuple[str, ...], halflife_seconds: float):
        self.operators = operators
        self.halflife_work = max(halflife_seconds * self.NOMINAL_FLIPS_PER_SECOND, 1.0)
        self.scores = {op: 0.0 for op in operators}

    def pick(self, rng: np.random.Generator) -> str:
        vals = np.array([self.scores[op] for op in self.operators])
        vals = vals - vals.max()
        probs = np.exp(vals)
        probs /= probs.sum()
        return self.operators[int(rng.choice(len(self.operators), p=probs))]

    def update(self, op: str, improvement: float, work: float) -> None:
        work = max(work, 1.0)
        decay = 0.5 ** (work / self.halflife_work)
        rate = max(improvement, 0.0) / work
        self.scores[op] = decay * self.scores[op] + (1.0 - decay) * rate


def _tabu_walk(state, x, deltas, rng, tenure, steps):
    """Tabu-limited flips: always take the best non-tabu move, even uphill."""
    n = state.num_vars
    tabu_until = np.zeros(n, dtype=np.int64)
    e = state.energy(x)
    best_x, best_e = x.copy(), e
    flips = 0
    for step in range(steps):
        masked = np.where(tabu_until > step, np.inf, deltas)
        i = int(np.argmin(masked))
        if not np.isfinite(masked[i]):
            break
        e += state.flip(x, deltas, i)
        tabu_until[i] = step + tenure
        flips += 1
        if e < best_e:
            best_e, best_x = e, x.copy()
    return best_x, flips


def solve_abs(qubo, budget: SolveBudget | None = None,
              pool: PoolConfig | None = None) -> SolveReport:
    """Adaptive pooled search: operator selection by decayed improvement
    rate, candidates refined by steepest descent, elite pool with dedupe."""
    budget = budget or SolveBudget()
    cfg = pool or PoolConfig()
    state = _as_state(qubo)
    n = state.num_vars
    start = time.perf_counter()
    tenure = cfg.tabu_tenure or math.ceil(math.sqrt(n))

    # pool entries: (energy, bit_hash, bits); kept sorted, unique by hash
    elite: list[tuple[float, int, np.ndarray]] = []
    hashes: set[int] = set()

    def offer(e: float, x: np.ndarray) -> None:
        hx = bit_hash(x)
        if cfg.dedupe and hx in hashes:
            return
        heapq_entry = (e, hx, x.copy())
        elite.append(heapq_entry)
        hashes.add(hx)
        elite.sort(key=lambda item: (item[0], item[1]))
        while len(elite) > cfg.pool_size:
            _, old_hash, _ = elite.pop()
            hashes.discard(old_hash)

    trace: list[tuple[float, float]] = []
    best_e = math.inf
    best_x = None
    scores = [_OperatorScores(cfg.operators, cfg.adaptation_halflife)
              for _ in range(budget.workers)]
    rngs = [np.random.default_rng(budget.seed ^ wid) for wid in range(budget.workers)]

    iterations = 0
    done = False
    while not done:
        for wid in range(budget.workers):
            if time.perf_counter() - start > budget.time_limit:
                done = True
                break
            if budget.max_iterations is not None and iterations >= budget.max_iterations:
                done = True
                break
            rng = rngs[wid]
            op = scores[wid].pick(rng)
            work = 0.0
            if op == "uniform-crossover" and len(elite) >= 2:
                pa, pb = rng.choice(len(elite), size=2, replace=False)
                mask = rng.integers(0, 2, size=n).astype(bool)
                x = np.where(mask, elite[pa][2], elite[pb][2]).astype(np.int8)
            elif op == "k-bit-mutation" and elite:
                x = elite[int(rng.integers(len(elite)))][2].copy()
                kbits = int(rng.geometric(1.0 / cfg.mutation_mean_bits))
                flip_idx = rng.choice(n, size=min(kbits, n), replace=False)
                x[flip_idx] ^= 1
            elif op == "tabu-flip" and elite:
                x = elite[int(rng.integers(len(elite)))][2].copy()
                deltas = state.deltas(x)
                x, tflips = _tabu_walk(state, x, deltas, rng, tenure, 2 * tenure)
                work += tflips
            else:  # descent-restart, or fallback when the pool is still empty
                x = rng.integers(0, 2, size=n).astype(np.int8)
            x, e, flips = _descend(state, x)
            work += flips
            iterations += 1
            improvement = (best_e - e) if math.isfinite(best_e) else 0.0
            scores[wid].update(op, improvement, work)
            offer(e, x)
            if e < best_e:
                best_e = e
                best_x = x.copy()
                trace.append((time.perf_counter() - start, e))
                if budget.target_energy is not None and e <= budget.target_energy:
                    done = True
                    break
    return SolveReport(
        best=best_x,
        best_energy=best_e,
        lower_bound=None,
        trace=trace,
        tts=trace[-1][0] if trace else 0.0,
        iterations=iterations,
        solver_name="abs",
        seed=budget.seed,
    )
