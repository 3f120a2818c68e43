"""Dense statevector simulation with exact probabilities and seeded sampling.

Amplitudes are complex128; qubit j is bit j of the state index (qubit 0 =
least significant). Sampling uses numpy's PCG64 generator, so identical
(state, shots, seed) gives bit-identical counts on any platform.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import cos, sin

import numpy as np

from .circuits import (CNOT, CRY, H, MCRY, ONE_CONTROL, PAULI_X_EXP, RX, RY,
                       RZ, SWAP, TOFFOLI, X, Circuit, Gate)

MAX_QUBITS = 20
_H_MAT = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_X_MAT = np.array([[0, 1], [1, 0]], dtype=complex)


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.n_qubits > MAX_QUBITS:
            raise ValueError(f"statevector capped at {MAX_QUBITS} qubits, got {self.n_qubits}")
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError(f"amplitude vector must have length 2^{self.n_qubits}")


@dataclass
class CountsTable:
    shots: int
    counts: dict[str, int]
    seed: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts must sum to shots")


def zero_state(n_qubits: int) -> StateVector:
    amps = np.zeros(1 << n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def basis_state(n_qubits: int, index: int) -> StateVector:
    amps = np.zeros(1 << n_qubits, dtype=complex)
    amps[index] = 1.0
    return StateVector(n_qubits, amps)


def _rotation_matrix(kind: str, theta: float) -> np.ndarray:
    c, s = cos(theta / 2), sin(theta / 2)
    if kind == RY or kind == CRY or kind == MCRY:
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == RX:
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    return np.array([[np.exp(-1j * theta / 2), 0], [0, np.exp(1j * theta / 2)]], dtype=complex)


def _apply_1q(amps: np.ndarray, mat: np.ndarray, q: int, n: int) -> np.ndarray:
    view = amps.reshape(1 << (n - 1 - q), 2, 1 << q)
    a0 = view[:, 0, :].copy()
    a1 = view[:, 1, :]
    view[:, 0, :] = mat[0, 0] * a0 + mat[0, 1] * a1
    view[:, 1, :] = mat[1, 0] * a0 + mat[1, 1] * a1
    return amps


def _control_mask_indices(n: int, controls, polarity: int, free_bit: int) -> np.ndarray:
    """Indices with all control bits at `polarity` and bit `free_bit` = 0."""
    idx = np.arange(1 << n)
    sel = (idx >> free_bit) & 1 == 0
    for c in controls:
        bit = (idx >> c) & 1
        sel &= bit == polarity
    return idx[sel]


def apply_gate(amps: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    """Apply one gate in place on the working buffer and return it."""
    k = gate.kind
    if k == X:
        return _apply_1q(amps, _X_MAT, gate.qubits[0], n)
    if k == H:
        return _apply_1q(amps, _H_MAT, gate.qubits[0], n)
    if k in (RX, RY, RZ):
        return _apply_1q(amps, _rotation_matrix(k, gate.angle), gate.qubits[0], n)
    if k == CNOT:
        c, t = gate.qubits
        i0 = _control_mask_indices(n, (c,), ONE_CONTROL, t)
        i1 = i0 | (1 << t)
        amps[i0], amps[i1] = amps[i1], amps[i0].copy()
        return amps
    if k == SWAP:
        a, b = gate.qubits
        idx = np.arange(1 << n)
        sel = ((idx >> a) & 1 == 1) & ((idx >> b) & 1 == 0)
        i0 = idx[sel]
        i1 = (i0 ^ (1 << a)) | (1 << b)
        amps[i0], amps[i1] = amps[i1], amps[i0].copy()
        return amps
    if k == TOFFOLI:
        c1, c2, t = gate.qubits
        i0 = _control_mask_indices(n, (c1, c2), ONE_CONTROL, t)
        i1 = i0 | (1 << t)
        amps[i0], amps[i1] = amps[i1], amps[i0].copy()
        return amps
    if k in (CRY, MCRY):
        mat = _rotation_matrix(RY, gate.angle)
        t = gate.target
        i0 = _control_mask_indices(n, gate.controls, gate.polarity, t)
        i1 = i0 | (1 << t)
        a0 = amps[i0].copy()
        a1 = amps[i1]
        amps[i0] = mat[0, 0] * a0 + mat[0, 1] * a1
        amps[i1] = mat[1, 0] * a0 + mat[1, 1] * a1
        return amps
    if k == PAULI_X_EXP:
        mask = 0
        for q in gate.qubits:
            mask |= 1 << q
        perm = np.arange(1 << n) ^ mask
        # exp(i t X⊗...⊗X) = cos(t) I + i sin(t) (X-string)
        flipped = amps[perm]
        return np.multiply(amps, cos(gate.angle), out=amps) + 1j * sin(gate.angle) * flipped
    raise ValueError(f"unknown gate kind {k}")


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    """Apply each gate in order; returns a new StateVector, norm checked to 1e-10."""
    if circuit.n_qubits != state.n_qubits:
        raise ValueError(f"circuit has {circuit.n_qubits} qubits, state has {state.n_qubits}")
    amps = state.amplitudes.copy()
    for gate in circuit.gates:
        amps = apply_gate(amps, gate, state.n_qubits)
    norm = np.linalg.norm(amps)
    if abs(norm - 1.0) > 1e-10:
        raise FloatingPointError(f"statevector norm drifted to {norm}")
    return StateVector(state.n_qubits, amps)


def run_circuit(circuit: Circuit) -> StateVector:
    """apply_circuit starting from |0...0>."""
    return apply_circuit(zero_state(circuit.n_qubits), circuit)


def probabilities(state: StateVector) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2


def bitstring(index: int, n_qubits: int) -> str:
    return format(index, f"0{n_qubits}b")


def sample_counts(state: StateVector, shots: int, seed: int) -> CountsTable:
    """Seeded multinomial draw from the exact outcome distribution."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = probabilities(state)
    probs = probs / probs.sum()
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.multinomial(shots, probs)
    counts = {bitstring(i, state.n_qubits): int(c) for i, c in enumerate(draws) if c > 0}
    return CountsTable(shots, counts, seed)


def marginal_probability(state: StateVector, qubit: int, value: int = 1) -> float:
    probs = probabilities(state)
    idx = np.arange(1 << state.n_qubits)
    return float(probs[(idx >> qubit) & 1 == value].sum())


def task_seed(base_seed: int, task_index: int) -> int:
    """Deterministic per-task seed derived from (base_seed, task_index)."""
    ss = np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, int(task_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
