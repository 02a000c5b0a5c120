"""Desk-scale statevector simulation of QAOA, VQE, and Trotterized
adiabatic annealing over Ising models.

Conventions, fixed here because results are sensitive to them:

- qubit i is bit i (least significant bit) of the basis-state index;
- bit 1 corresponds to spin +1, bit 0 to spin -1;
- the driver Hamiltonian is -sum(sigma_x), whose ground state is the
  uniform superposition used as the initial state for annealing.

Statevectors are dense complex arrays of length 2^m, so m is capped
(default 20, overridable via the QUBOFOLIO_QUBIT_CAP environment
variable).  Each run owns its statevector; independent runs share
nothing mutable.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .qubo import IsingModel

__all__ = [
    "QuantumSimError",
    "DiagonalCost",
    "QaoaParams",
    "AnnealSchedule",
    "qubit_cap",
    "diagonalize_cost",
    "qaoa_run",
    "qaoa_optimize",
    "vqe_run",
    "anneal_run",
]

DEFAULT_QUBIT_CAP = 20


class QuantumSimError(ValueError):
    """Raised on qubit-cap violations or invalid schedules."""


def qubit_cap() -> int:
    raw = os.environ.get("QUBOFOLIO_QUBIT_CAP")
    if raw is None:
        return DEFAULT_QUBIT_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise QuantumSimError(f"QUBOFOLIO_QUBIT_CAP must be an integer, got {raw!r}")
    if cap < 1:
        raise QuantumSimError("QUBOFOLIO_QUBIT_CAP must be >= 1")
    return cap


def _check_cap(m: int) -> None:
    cap = qubit_cap()
    if m > cap:
        raise QuantumSimError(f"{m} qubits exceeds the simulator cap of {cap}")


@dataclass(frozen=True)
class DiagonalCost:
    """Ising energies of every computational basis state."""

    num_qubits: int
    energies: np.ndarray  # shape (2^m,), energies[z] = F(spins of z) + offset

    @property
    def ground_energy(self) -> float:
        return float(self.energies.min())

    def ground_states(self) -> np.ndarray:
        """Indices of every basis state attaining the minimum energy."""
        e = self.energies
        return np.flatnonzero(e <= e.min() + 1e-12 * max(1.0, abs(e.min())))


@dataclass(frozen=True)
class QaoaParams:
    gammas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self):
        if len(self.gammas) != len(self.betas):
            raise QuantumSimError("gammas and betas must have equal length")

    @property
    def layers(self) -> int:
        return len(self.gammas)


@dataclass(frozen=True)
class AnnealSchedule:
    """Interpolation H(s) = A(s) * H_driver + B(s) * H_cost on s in [0, 1]."""

    total_time: float
    dt: float = 0.01
    envelope: str = "linear"  # or "cosine"

    def __post_init__(self):
        if self.dt <= 0:
            raise QuantumSimError("dt must be positive")
        if self.dt >= self.total_time:
            raise QuantumSimError("dt must be smaller than total_time")
        if self.envelope not in ("linear", "cosine"):
            raise QuantumSimError(f"unknown envelope {self.envelope!r}")

    @property
    def steps(self) -> int:
        return max(int(round(self.total_time / self.dt)), 1)

    def ab(self, s: float) -> tuple[float, float]:
        if self.envelope == "linear":
            return 1.0 - s, s
        half = 0.5 * (1.0 + math.cos(math.pi * s))
        return half, 1.0 - half


def _spins(m: int) -> np.ndarray:
    """(2^m, m) matrix of spins, bit 1 -> +1."""
    idx = np.arange(1 << m, dtype=np.uint64)
    bits = (idx[:, None] >> np.arange(m, dtype=np.uint64)) & 1
    return 2.0 * bits.astype(float) - 1.0


def normalize_ising(ising: IsingModel) -> tuple[IsingModel, float]:
    """Rescale so the largest |h|/|J| coefficient is 1.

    Minimizers are unchanged and energies scale linearly, but the cost
    term becomes commensurate with the unit-strength driver; portfolio
    instances carry currency-scale coefficients that would otherwise
    swamp the mixer.  Returns (scaled model, scale) with
    original_energy = scale * scaled_energy.
    """
    scale = max(
        float(np.abs(ising.h).max(initial=0.0)),
        float(np.abs(ising.j_vals).max(initial=0.0)),
    )
    if scale == 0.0 or scale == 1.0:
        return ising, 1.0
    return IsingModel(
        h=ising.h / scale,
        j_rows=ising.j_rows, j_cols=ising.j_cols,
        j_vals=ising.j_vals / scale,
        offset=ising.offset / scale,
    ), scale


def diagonalize_cost(ising: IsingModel) -> DiagonalCost:
    """Evaluate the Ising objective on every basis state."""
    m = ising.num_spins
    _check_cap(m)
    spins = _spins(m)
    energies = spins @ ising.h + ising.offset
    for i, j, v in zip(ising.j_rows, ising.j_cols, ising.j_vals):
        energies += v * spins[:, i] * spins[:, j]
    return DiagonalCost(num_qubits=m, energies=np.asarray(energies, float))


# --- single-qubit gate application -------------------------------------------


def _apply_single(state: np.ndarray, qubit: int, gate: np.ndarray) -> None:
    """Apply a 2x2 gate to one qubit of a dense statevector in place."""
    m = state.shape[0].bit_length() - 1
    shaped = state.reshape(1 << (m - qubit - 1), 2, 1 << qubit)
    a = gate[0, 0] * shaped[:, 0, :] + gate[0, 1] * shaped[:, 1, :]
    b = gate[1, 0] * shaped[:, 0, :] + gate[1, 1] * shaped[:, 1, :]
    shaped[:, 0, :] = a
    shaped[:, 1, :] = b


def _rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, -1j * s], [-1j * s, c]])


def _ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _uniform_state(m: int) -> np.ndarray:
    state = np.full(1 << m, 1.0 / math.sqrt(1 << m), dtype=complex)
    return state


def _check_norm(state: np.ndarray) -> None:
    norm2 = float(np.vdot(state, state).real)
    if abs(norm2 - 1.0) > 1e-9:
        raise QuantumSimError(f"statevector norm drifted to {norm2}")


def _sample(state: np.ndarray, shots: int, rng: np.random.Generator) -> dict[str, int]:
    probs = np.abs(state) ** 2
    probs = probs / probs.sum()
    counts = rng.multinomial(shots, probs)
    m = state.shape[0].bit_length() - 1
    hist = {}
    for z in np.flatnonzero(counts):
        hist[format(int(z), f"0{m}b")[::-1]] = int(counts[z])  # qubit 0 first
    return hist


def _bits_of(z: int, m: int) -> str:
    return format(z, f"0{m}b")[::-1]


def _run_doc(algo: str, cost: DiagonalCost, state: np.ndarray, shots: int,
             rng: np.random.Generator, params) -> dict:
    probs = np.abs(state) ** 2
    expectation = float(probs @ cost.energies)
    ground = cost.ground_states()
    hist = _sample(state, shots, rng) if shots else {}
    if hist:
        best_bits = min(hist, key=lambda b: cost.energies[int(b[::-1], 2)])
    else:
        best_bits = _bits_of(int(np.argmax(probs)), cost.num_qubits)
    return {
        "algo": algo,
        "qubits": cost.num_qubits,
        "ground_energy": cost.ground_energy,
        "ground_probability": float(probs[ground].sum()),
        "expectation": expectation,
        "best_bits": best_bits,
        "params": params,
        "samples_hist": hist,
    }


# --- QAOA ---------------------------------------------------------------------


def _qaoa_state(cost: DiagonalCost, params: QaoaParams) -> np.ndarray:
    state = _uniform_state(cost.num_qubits)
    for gamma, beta in zip(params.gammas, params.betas):
        state *= np.exp(-1j * gamma * cost.energies)
        mixer = _rx(2.0 * beta)
        for qubit in range(cost.num_qubits):
            _apply_single(state, qubit, mixer)
        _check_norm(state)
    return state


def qaoa_run(ising: IsingModel, params: QaoaParams, shots: int = 1024,
             seed: int = 0) -> dict:
    """Alternating phase/mixer circuit from the uniform superposition."""
    cost = diagonalize_cost(ising)
    state = _qaoa_state(cost, params)
    rng = np.random.default_rng(seed)
    return _run_doc("qaoa", cost, state, shots, rng,
                    {"gammas": list(params.gammas), "betas": list(params.betas)})


def qaoa_optimize(ising: IsingModel, layers: int, restarts: int = 8,
                  seed: int = 0, maxiter: int = 200) -> tuple[QaoaParams, dict]:
    """Nelder-Mead over 2p angles with seeded random restarts.

    Returns the best parameters by exact expectation together with a
    report containing the per-restart expectation trace.
    """
    if layers < 1:
        raise QuantumSimError("layers must be >= 1")
    cost = diagonalize_cost(ising)

    def objective(theta):
        params = QaoaParams(tuple(theta[:layers]), tuple(theta[layers:]))
        state = _qaoa_state(cost, params)
        return float((np.abs(state) ** 2) @ cost.energies)

    rng = np.random.default_rng(seed)
    best_val = math.inf
    best_theta = None
    trace = []
    for _ in range(restarts):
        theta0 = np.concatenate([
            rng.uniform(0.0, math.pi, size=layers),      # gammas
            rng.uniform(0.0, math.pi / 2.0, size=layers),  # betas
        ])
        res = minimize(objective, theta0, method="Nelder-Mead",
                       options={"maxiter": maxiter, "xatol": 1e-4, "fatol": 1e-7})
        trace.append(float(res.fun))
        if res.fun < best_val:
            best_val = float(res.fun)
            best_theta = res.x
    params = QaoaParams(tuple(best_theta[:layers]), tuple(best_theta[layers:]))
    report = {"expectation": best_val, "restart_trace": trace,
              "ground_energy": cost.ground_energy}
    return params, report


# --- VQE ----------------------------------------------------------------------


def _vqe_state(m: int, layers: int, theta: np.ndarray) -> np.ndarray:
    """L repetitions of [RY on every qubit; ring of CZ entanglers] on |0...0>."""
    state = np.zeros(1 << m, dtype=complex)
    state[0] = 1.0
    idx = np.arange(1 << m, dtype=np.uint64)
    for layer in range(layers):
        for qubit in range(m):
            _apply_single(state, qubit, _ry(theta[layer * m + qubit]))
        if m >= 2:
            for qubit in range(m):
                other = (qubit + 1) % m
                if m == 2 and qubit == 1:
                    break  # avoid applying the same CZ pair twice
                both = ((idx >> np.uint64(qubit)) & 1) & ((idx >> np.uint64(other)) & 1)
                state[both.astype(bool)] *= -1.0
    _check_norm(state)
    return state


def vqe_run(ising: IsingModel, layers: int = 2, restarts: int = 8,
            seed: int = 0, maxiter: int = 300) -> dict:
    """Variational minimization of the exact Ising expectation."""
    if layers < 1:
        raise QuantumSimError("layers must be >= 1")
    cost = diagonalize_cost(ising)
    m = cost.num_qubits

    def objective(theta):
        state = _vqe_state(m, layers, theta)
        return float((np.abs(state) ** 2) @ cost.energies)

    rng = np.random.default_rng(seed)
    best_val = math.inf
    best_theta = None
    trace = []
    for _ in range(restarts):
        theta0 = rng.uniform(-math.pi, math.pi, size=layers * m)
        res = minimize(objective, theta0, method="Nelder-Mead",
                       options={"maxiter": maxiter, "xatol": 1e-5, "fatol": 1e-9})
        trace.append(float(res.fun))
        if res.fun < best_val:
            best_val = float(res.fun)
            best_theta = res.x
    state = _vqe_state(m, layers, best_theta)
    doc = _run_doc("vqe", cost, state, 0, np.random.default_rng(seed),
                   {"layers": layers, "theta": [float(v) for v in best_theta]})
    doc["expectation"] = best_val
    doc["restart_trace"] = trace
    return doc


# --- Trotterized annealing ------------------------------------------------------


def anneal_run(ising: IsingModel, schedule: AnnealSchedule, shots: int = 1024,
               seed: int = 0) -> dict:
    """First-order Trotter evolution under H(s) = A(s)*(-sum sigma_x) + B(s)*H_cost.

    Starts in the uniform superposition (the driver's ground state) and
    alternates per-qubit X rotations with diagonal cost phases, using the
    midpoint of each step for the envelopes.  The norm is renormalized
    each step to keep floating-point drift from accumulating.
    """
    cost = diagonalize_cost(ising)
    m = cost.num_qubits
    state = _uniform_state(m)
    steps = schedule.steps
    dt = schedule.total_time / steps
    for step in range(steps):
        s = (step + 0.5) * dt / schedule.total_time
        a, b = schedule.ab(s)
        # exp(-i * A * (-sum sigma_x) * dt) factors into per-qubit RX(-2*A*dt)
        mixer = _rx(-2.0 * a * dt)
        for qubit in range(m):
            _apply_single(state, qubit, mixer)
        state *= np.exp(-1j * b * dt * cost.energies)
        state /= math.sqrt(float(np.vdot(state, state).real))
        _check_norm(state)
    rng = np.random.default_rng(seed)
    return _run_doc("anneal", cost, state, shots, rng,
                    {"total_time": schedule.total_time, "dt": schedule.dt,
                     "envelope": schedule.envelope})
