"""Assembly of the multi-period objective into QUBO / BQP / Ising form.

Energy convention for the block form:

    E(x) = offset + linear . x
         + sum_t  x_t' D_t x_t                       (D_t symmetric, diagonal kept)
         + sum_t  sum_a cross[t, a] x[t, a] x[t+1, a]

The quadratic form x' D x counts every unordered off-diagonal pair twice,
so the total pair coefficient between two distinct same-step variables is
2 * D[i, j].  Cross-step
couplings exist only between the same trading slot at adjacent steps (the
transaction-cost band); slack bits never couple across steps.

BlockQubo is immutable after build and may be shared read-only across
solver workers.  Assignment arrays and delta caches are single-owner
mutable state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelError, ProblemSpec, VariableLayout, constraint_residuals

__all__ = [
    "QuboError",
    "QuboParseError",
    "BlockQubo",
    "SparseQubo",
    "BqpView",
    "IsingModel",
    "build_qubo",
    "build_bqp",
    "resolve_penalty",
    "energy",
    "delta_energies",
    "apply_flip",
    "to_sparse",
    "to_dense",
    "to_ising",
    "ising_value",
    "objective_breakdown",
    "step_components",
    "write_qubo_text",
    "read_qubo_text",
    "write_ising_text",
]


class QuboError(ValueError):
    pass


class QuboParseError(QuboError):
    """Raised on malformed QUBO/Ising text files."""


@dataclass(frozen=True)
class BlockQubo:
    """Block-banded quadratic objective over the per-step variable layout."""

    layout: VariableLayout
    diag_blocks: list[np.ndarray]  # T symmetric (w, w) matrices
    cross: np.ndarray  # (T-1, w); nonzero only at trading-slot positions
    linear: np.ndarray  # (total,)
    offset: float
    penalty_weight: float  # resolved P (0.0 when penalties omitted)

    @property
    def num_vars(self) -> int:
        return self.layout.total


@dataclass(frozen=True)
class SparseQubo:
    """Upper-triangular triplet export form; no duplicates, no explicit zeros."""

    num_vars: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    offset: float

    def __post_init__(self):
        if np.any(self.rows > self.cols):
            raise QuboError("triplets must satisfy i <= j")

    @property
    def num_terms(self) -> int:
        return len(self.vals)


@dataclass(frozen=True)
class BqpView:
    """Penalty-free objective plus explicit per-step equality constraints."""

    objective: SparseQubo
    # per step: (indices, coefficients, rhs) for the asset-count and cash rows
    asset_rows: list[tuple[np.ndarray, np.ndarray, int]]
    cash_rows: list[tuple[np.ndarray, np.ndarray, int]]


@dataclass(frozen=True)
class IsingModel:
    """Spin model F(s) = sum h_i s_i + sum_{i<j} J_ij s_i s_j + offset, s in {-1,+1}."""

    h: np.ndarray
    j_rows: np.ndarray
    j_cols: np.ndarray
    j_vals: np.ndarray
    offset: float

    @property
    def num_spins(self) -> int:
        return len(self.h)


def _check_bits(num_vars: int, bits) -> np.ndarray:
    x = np.asarray(bits).ravel()
    if x.shape[0] != num_vars:
        raise QuboError(f"assignment length {x.shape[0]} != num_vars {num_vars}")
    return x


def _nonpenalty_step(spec: ProblemSpec, lay: VariableLayout, t: int):
    """Non-penalty D block and linear vector for step t (1-based)."""
    w = lay.step_width
    kn2 = 2 * lay.kn
    asset = lay.asset_of[:kn2]
    tau = lay.tau_of[:kn2].astype(float)
    p = spec.prices.p
    prm = spec.params
    pt = p[asset, t - 1]
    pt1 = p[asset, t]

    D = np.zeros((w, w))
    if prm.q > 0:
        wvec = tau if spec.signed_risk else np.ones(kn2)
        wp = wvec * pt
        sig = spec.covariances.sigma[t - 1][np.ix_(asset, asset)]
        D[:kn2, :kn2] = prm.q * np.outer(wp, wp) * sig

    lin = np.zeros(w)
    lin[:kn2] -= tau * (pt1 - pt)  # profit enters with a minus sign
    lin[:kn2] += prm.delta * pt  # own-step leg of the turnover cost
    if t < lay.T:
        lin[:kn2] += prm.delta * pt1  # previous-step leg of the t+1 turnover cost
    else:
        lin[:kn2] += prm.delta * p[asset, lay.T - 1]  # terminal liquidation
    lin[:kn2] += prm.rho_s * pt * (tau < 0)
    y_slice = slice(kn2 + lay.nb, w)
    lin[y_slice] -= prm.rho_c * prm.u * lay.slack_weight[y_slice]
    return D, lin


def _penalty_rows(lay: VariableLayout) -> tuple[np.ndarray, np.ndarray]:
    """Constraint coefficient vectors over one step: asset-count row, cash row."""
    w = lay.step_width
    kn2 = 2 * lay.kn
    w_asset = np.zeros(w)
    w_asset[:kn2] = 1.0
    w_asset[kn2 : kn2 + lay.nb] = lay.slack_weight[kn2 : kn2 + lay.nb]
    w_cash = np.zeros(w)
    w_cash[:kn2] = lay.tau_of[:kn2]
    w_cash[kn2 + lay.nb :] = lay.slack_weight[kn2 + lay.nb :]
    return w_asset, w_cash


def resolve_penalty(spec: ProblemSpec) -> float:
    """Penalty weight: explicit P if given, else 10 * max |coefficient| * (B + C)."""
    if spec.params.P is not None:
        return spec.params.P
    lay = spec.layout
    maxcoef = 0.0
    for t in range(1, lay.T + 1):
        D, lin = _nonpenalty_step(spec, lay, t)
        maxcoef = max(maxcoef, np.abs(D).max(initial=0.0), np.abs(lin).max(initial=0.0))
        if t < lay.T:
            kn2 = 2 * lay.kn
            asset = lay.asset_of[:kn2]
            maxcoef = max(maxcoef, 2.0 * spec.params.delta * spec.prices.p[asset, t].max())
    if maxcoef == 0.0:
        return 1.0
    return 10.0 * maxcoef * (spec.B + spec.C)


def build_qubo(spec: ProblemSpec, include_penalty: bool = True) -> BlockQubo:
    """Assemble the full minimization objective in block-banded form."""
    lay = spec.layout
    w = lay.step_width
    kn2 = 2 * lay.kn
    asset = lay.asset_of[:kn2]
    prm = spec.params

    diag_blocks: list[np.ndarray] = []
    linear = np.zeros(lay.total)
    cross = np.zeros((max(lay.T - 1, 0), w))
    maxcoef = 0.0
    for t in range(1, lay.T + 1):
        D, lin = _nonpenalty_step(spec, lay, t)
        diag_blocks.append(D)
        linear[lay.step_slice(t)] = lin
        maxcoef = max(maxcoef, np.abs(D).max(initial=0.0), np.abs(lin).max(initial=0.0))
        if t >= 2:
            cross[t - 2, :kn2] = -2.0 * prm.delta * spec.prices.p[asset, t - 1]
    if cross.size:
        maxcoef = max(maxcoef, np.abs(cross).max())

    offset = 0.0
    penalty = 0.0
    if include_penalty:
        if prm.P is not None:
            penalty = prm.P
        else:
            penalty = 10.0 * maxcoef * (spec.B + spec.C) if maxcoef > 0 else 1.0
        w_asset, w_cash = _penalty_rows(lay)
        pen_quad = penalty * (np.outer(w_asset, w_asset) + np.outer(w_cash, w_cash))
        pen_lin = -2.0 * penalty * (spec.B * w_asset + spec.C * w_cash)
        for t in range(1, lay.T + 1):
            diag_blocks[t - 1] += pen_quad
            linear[lay.step_slice(t)] += pen_lin
        offset = penalty * lay.T * (spec.B**2 + spec.C**2)

    return BlockQubo(
        layout=lay,
        diag_blocks=diag_blocks,
        cross=cross,
        linear=linear,
        offset=offset,
        penalty_weight=penalty,
    )


def build_bqp(spec: ProblemSpec) -> BqpView:
    """Objective identical to build_qubo minus penalties, plus equality rows."""
    objective = to_sparse(build_qubo(spec, include_penalty=False))
    lay = spec.layout
    kn2 = 2 * lay.kn
    w_asset, w_cash = _penalty_rows(lay)
    asset_rows = []
    cash_rows = []
    for t in range(1, lay.T + 1):
        base = (t - 1) * lay.step_width
        a_idx = np.flatnonzero(w_asset)
        c_idx = np.flatnonzero(w_cash)
        asset_rows.append((base + a_idx, w_asset[a_idx].copy(), spec.B))
        cash_rows.append((base + c_idx, w_cash[c_idx].copy(), spec.C))
    return BqpView(objective=objective, asset_rows=asset_rows, cash_rows=cash_rows)


def energy(qubo: BlockQubo, bits) -> float:
    """Exact quadratic-form value including offset.

    Per-block contributions are computed separately and combined with an
    exactly-rounded sum so large instances evaluate reproducibly across
    orderings.
    """
    lay = qubo.layout
    x = _check_bits(lay.total, bits).astype(float).reshape(lay.T, lay.step_width)
    parts = [qubo.offset, float(qubo.linear @ x.ravel())]
    for t in range(lay.T):
        xt = x[t]
        parts.append(float(xt @ (qubo.diag_blocks[t] @ xt)))
    for t in range(lay.T - 1):
        parts.append(float((qubo.cross[t] * x[t] * x[t + 1]).sum()))
    return math.fsum(parts)


def delta_energies(qubo: BlockQubo, bits) -> np.ndarray:
    """Vector of exact energy changes for flipping each bit."""
    lay = qubo.layout
    x = _check_bits(lay.total, bits).astype(float).reshape(lay.T, lay.step_width)
    w = lay.step_width
    deltas = np.empty((lay.T, w))
    for t in range(lay.T):
        D = qubo.diag_blocks[t]
        dg = np.diagonal(D)
        inner = qubo.linear[t * w : (t + 1) * w] + dg + 2.0 * (D @ x[t]) - 2.0 * dg * x[t]
        if t > 0:
            inner += qubo.cross[t - 1] * x[t - 1]
        if t < lay.T - 1:
            inner += qubo.cross[t] * x[t + 1]
        deltas[t] = (1.0 - 2.0 * x[t]) * inner
    return deltas.ravel()


def apply_flip(qubo: BlockQubo, bits: np.ndarray, i: int, deltas: np.ndarray) -> float:
    """Flip bit i in place; update deltas of its neighbors; return the energy change.

    Cost is proportional to the step width plus the two adjacent-step
    couplings, never the total variable count.
    """
    lay = qubo.layout
    w = lay.step_width
    if not 0 <= i < lay.total:
        raise QuboError(f"flip index {i} out of range 0..{lay.total - 1}")
    t, j = divmod(i, w)
    d = 1.0 - 2.0 * bits[i]  # new value minus old value
    change = deltas[i]
    sl = slice(t * w, (t + 1) * w)
    col = 2.0 * qubo.diag_blocks[t][:, j] * d
    col[j] = 0.0
    deltas[sl] += (1.0 - 2.0 * bits[sl]) * col
    kn2 = 2 * lay.kn
    if j < kn2:
        if t > 0:
            m = i - w
            deltas[m] += (1.0 - 2.0 * bits[m]) * qubo.cross[t - 1, j] * d
        if t < lay.T - 1:
            m = i + w
            deltas[m] += (1.0 - 2.0 * bits[m]) * qubo.cross[t, j] * d
    bits[i] ^= 1
    deltas[i] = -change
    return float(change)


def to_sparse(qubo: BlockQubo) -> SparseQubo:
    """Collapse the block form into deduplicated upper-triangular triplets."""
    lay = qubo.layout
    w = lay.step_width
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    iu, ju = np.triu_indices(w, k=1)
    for t in range(lay.T):
        base = t * w
        D = qubo.diag_blocks[t]
        diag_vals = qubo.linear[base : base + w] + np.diagonal(D)
        idx = np.arange(base, base + w)
        rows.append(idx)
        cols.append(idx)
        vals.append(diag_vals)
        pair = 2.0 * D[iu, ju]
        rows.append(base + iu)
        cols.append(base + ju)
        vals.append(pair)
        if t < lay.T - 1:
            slots = np.flatnonzero(qubo.cross[t])
            rows.append(base + slots)
            cols.append(base + w + slots)
            vals.append(qubo.cross[t, slots])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    keep = v != 0.0
    r, c, v = r[keep], c[keep], v[keep]
    order = np.lexsort((c, r))
    return SparseQubo(num_vars=lay.total, rows=r[order], cols=c[order], vals=v[order],
                      offset=qubo.offset)


_DENSE_LIMIT = 8192


def to_dense(qubo) -> tuple[np.ndarray, float]:
    """Symmetric dense matrix A with linear terms on the diagonal: E = x'Ax + offset."""
    if isinstance(qubo, BlockQubo):
        qubo = to_sparse(qubo)
    if not isinstance(qubo, SparseQubo):
        raise QuboError(f"cannot densify {type(qubo).__name__}")
    if qubo.num_vars > _DENSE_LIMIT:
        raise QuboError(f"{qubo.num_vars} variables exceeds dense limit {_DENSE_LIMIT}")
    A = np.zeros((qubo.num_vars, qubo.num_vars))
    diag = qubo.rows == qubo.cols
    A[qubo.rows[diag], qubo.cols[diag]] = qubo.vals[diag]
    off = ~diag
    A[qubo.rows[off], qubo.cols[off]] = qubo.vals[off] / 2.0
    A[qubo.cols[off], qubo.rows[off]] = qubo.vals[off] / 2.0
    return A, qubo.offset


def dense_energies(A: np.ndarray, offset: float, X: np.ndarray) -> np.ndarray:
    """Batch energies of 0/1 row vectors under E = x'Ax + offset."""
    X = np.asarray(X, dtype=float)
    return ((X @ A) * X).sum(axis=1) + offset


def to_ising(qubo) -> IsingModel:
    """Map x = (s + 1)/2 so that F(s) + offset' equals the QUBO energy exactly."""
    if isinstance(qubo, BlockQubo):
        qubo = to_sparse(qubo)
    n = qubo.num_vars
    h = np.zeros(n)
    offset = qubo.offset
    diag = qubo.rows == qubo.cols
    dr, dv = qubo.rows[diag], qubo.vals[diag]
    np.add.at(h, dr, dv / 2.0)
    offset += float((dv / 2.0).sum())
    off = ~diag
    orow, ocol, oval = qubo.rows[off], qubo.cols[off], qubo.vals[off]
    np.add.at(h, orow, oval / 4.0)
    np.add.at(h, ocol, oval / 4.0)
    offset += float((oval / 4.0).sum())
    return IsingModel(h=h, j_rows=orow, j_cols=ocol, j_vals=oval / 4.0, offset=offset)


def ising_value(ising: IsingModel, spins) -> float:
    """F(s) + offset for one spin vector in {-1,+1}^n."""
    s = np.asarray(spins, dtype=float)
    return float(ising.h @ s + (ising.j_vals * s[ising.j_rows] * s[ising.j_cols]).sum()
                 + ising.offset)


def step_components(spec: ProblemSpec, bits) -> dict[str, np.ndarray]:
    """Per-step objective ingredients, all as length-T arrays in currency.

    Sign conventions are "natural": gross_profit and cash_interest are
    income (positive good), the cost entries are outlays (positive bad).
    """
    lay = spec.layout
    x = _check_bits(lay.total, bits).astype(float).reshape(lay.T, lay.step_width)
    kn2 = 2 * lay.kn
    asset = lay.asset_of[:kn2]
    tau = lay.tau_of[:kn2].astype(float)
    p = spec.prices.p
    prm = spec.params
    T, n = lay.T, lay.n

    trade = x[:, :kn2]
    y_bits = x[:, kn2 + lay.nb :]
    p_step = p[asset, :].T[:T]  # (T, kn2): price of each trading slot at its step
    p_next = p[asset, :].T[1 : T + 1]

    gross_profit = (trade * tau * (p_next - p_step)).sum(axis=1)
    prev = np.vstack([np.zeros(kn2), trade[:-1]])
    transaction = prm.delta * (p_step * (prev + trade - 2.0 * prev * trade)).sum(axis=1)
    liquidation = np.zeros(T)
    liquidation[-1] = prm.delta * (p_step[-1] * trade[-1]).sum()
    short_cost = prm.rho_s * (p_step * trade * (tau < 0)).sum(axis=1)
    cash_interest = prm.rho_c * prm.u * (y_bits @ lay.slack_weight[kn2 + lay.nb :])

    risk = np.zeros(T)
    if prm.q > 0:
        wvec = tau if spec.signed_risk else np.ones(kn2)
        for t in range(T):
            g = np.bincount(asset, weights=wvec * p_step[t] * trade[t], minlength=n)
            risk[t] = prm.q * g @ spec.covariances.sigma[t] @ g

    res = constraint_residuals(spec, bits).astype(float)
    P = resolve_penalty(spec)
    penalty = P * (res**2).sum(axis=1)
    return {
        "risk": risk,
        "gross_profit": gross_profit,
        "transaction": transaction,
        "liquidation": liquidation,
        "short_cost": short_cost,
        "cash_interest": cash_interest,
        "penalty": penalty,
    }


def objective_breakdown(spec: ProblemSpec, bits) -> dict[str, float]:
    """Objective-signed components; they sum to energy(build_qubo(spec), bits)."""
    comp = step_components(spec, bits)
    return {
        "risk": float(comp["risk"].sum()),
        "profit": -float(comp["gross_profit"].sum()),
        "transaction": float(comp["transaction"].sum()),
        "liquidation": float(comp["liquidation"].sum()),
        "cash_interest": -float(comp["cash_interest"].sum()),
        "short_cost": float(comp["short_cost"].sum()),
        "penalty": float(comp["penalty"].sum()),
    }


# --- text export ------------------------------------------------------------


def write_qubo_text(sparse: SparseQubo, path) -> None:
    """`p qubo <num_vars> <num_terms> <offset>` then `i j value` lines, i <= j."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"p qubo {sparse.num_vars} {sparse.num_terms} {float(sparse.offset)!r}\n")
        for i, j, v in zip(sparse.rows, sparse.cols, sparse.vals):
            fh.write(f"{int(i)} {int(j)} {float(v)!r}\n")


def write_ising_text(ising: IsingModel, path) -> None:
    """Same line format as the QUBO export; h terms appear as `i i value`."""
    h_idx = np.flatnonzero(ising.h)
    num_terms = len(h_idx) + len(ising.j_vals)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"p ising {ising.num_spins} {num_terms} {float(ising.offset)!r}\n")
        for i in h_idx:
            fh.write(f"{int(i)} {int(i)} {float(ising.h[i])!r}\n")
        for i, j, v in zip(ising.j_rows, ising.j_cols, ising.j_vals):
            fh.write(f"{int(i)} {int(j)} {float(v)!r}\n")


def read_qubo_text(path):
    """Parse the text export; returns SparseQubo or IsingModel per the header."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0] != "p" or header[1] not in ("qubo", "ising"):
            raise QuboParseError(f"{path}: bad header {' '.join(header)!r}")
        try:
            num_vars = int(header[2])
            num_terms = int(header[3])
            offset = float(header[4])
        except ValueError as exc:
            raise QuboParseError(f"{path}: bad header values: {exc}") from exc
        rows = np.empty(num_terms, dtype=np.int64)
        cols = np.empty(num_terms, dtype=np.int64)
        vals = np.empty(num_terms)
        for idx in range(num_terms):
            line = fh.readline()
            if not line:
                raise QuboParseError(f"{path}: expected {num_terms} terms, got {idx}")
            parts = line.split()
            try:
                rows[idx], cols[idx], vals[idx] = int(parts[0]), int(parts[1]), float(parts[2])
            except (IndexError, ValueError) as exc:
                raise QuboParseError(f"{path}:{idx + 2}: bad term line {line!r}") from exc
    if np.any(rows > cols) or np.any(cols >= num_vars) or np.any(rows < 0):
        raise QuboParseError(f"{path}: term indices out of range or not upper-triangular")
    if header[1] == "ising":
        diag = rows == cols
        h = np.zeros(num_vars)
        h[rows[diag]] = vals[diag]
        return IsingModel(h=h, j_rows=rows[~diag], j_cols=cols[~diag],
                          j_vals=vals[~diag], offset=offset)
    return SparseQubo(num_vars=num_vars, rows=rows, cols=cols, vals=vals, offset=offset)
