"""Biased Pauli error environment and noise-location accounting.

Every elementary operation is followed by an independent Pauli channel on
each qubit it touches: one channel after a one-qubit gate or a fresh |0>
preparation, one channel on each of the two qubits after a CNOT, and one
channel immediately before a measurement readout.  Conditional recoveries
(syndrome-dependent Pauli corrections, teleportation fix-ups) are noisy by
default and tracked separately, since whether they fire depends on the
branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from . import kernels, states
from .states import DensityMatrix, GateOp, PureState, UsageError

PAULI_NAMES = ("I", "X", "Y", "Z")

# Composition table over {I,X,Y,Z} ignoring phases: entry [i][j] is the index
# of P_i P_j.  Equivalent to XOR of (z,x) symplectic bit pairs.
_COMPOSE = np.array(
    [[0, 1, 2, 3], [1, 0, 3, 2], [2, 3, 0, 1], [3, 2, 1, 0]], dtype=np.intp
)


def compose_pauli_probs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Probability vector of the composition of two independent Pauli
    channels on the same qubit (order [I, X, Y, Z])."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.zeros(4)
    for i in range(4):
        out[_COMPOSE[i]] += a[i] * b
    return out


@dataclass(frozen=True)
class NoiseModel:
    """Independent (p_x, p_y, p_z) Pauli environment plus location flags.

    noisy_prep / noisy_measure control whether preparations and readouts are
    error locations at all; noisy_recovery controls whether conditional
    corrections are themselves followed by a channel; ideal_theta_ancilla
    makes the teleportation resource-state preparation error free while the
    rest of the circuit stays noisy.
    """

    p_x: float = 0.0
    p_y: float = 0.0
    p_z: float = 0.0
    noisy_prep: bool = True
    noisy_measure: bool = True
    noisy_recovery: bool = True
    ideal_theta_ancilla: bool = False

    def __post_init__(self):
        for name in ("p_x", "p_y", "p_z"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise UsageError(f"{name}={v} outside [0, 1]")
        if self.p_total > 1.0:
            raise UsageError(f"p_x + p_y + p_z = {self.p_total} exceeds 1")

    @property
    def p_total(self) -> float:
        return self.p_x + self.p_y + self.p_z

    @property
    def probs(self) -> np.ndarray:
        return np.array([1.0 - self.p_total, self.p_x, self.p_y, self.p_z])

    @property
    def is_noiseless(self) -> bool:
        return self.p_total == 0.0

    @classmethod
    def depolarizing(cls, p: float, **flags) -> "NoiseModel":
        return cls(p_x=p / 3.0, p_y=p / 3.0, p_z=p / 3.0, **flags)

    @classmethod
    def dominant(cls, axis: str, p: float, floor: float = 1e-10, **flags):
        """One Pauli axis at strength p, the other two at a small floor."""
        if axis not in ("x", "y", "z"):
            raise UsageError(f"axis must be x, y or z, not {axis!r}")
        ps = {"p_x": floor, "p_y": floor, "p_z": floor}
        ps[f"p_{axis}"] = p
        return cls(**ps, **flags)

    def noiseless(self) -> "NoiseModel":
        return replace(self, p_x=0.0, p_y=0.0, p_z=0.0)


@dataclass
class LocationCounter:
    """Counts of deterministic error locations by category.

    `conditional` tracks branch-dependent recovery channels and is reported
    separately from the structural total.
    """

    gate_1q: int = 0
    cnot: int = 0
    prep: int = 0
    measure: int = 0
    conditional: int = 0

    @property
    def total(self) -> int:
        """Structural channel count: CNOTs contribute two locations."""
        return self.gate_1q + 2 * self.cnot + self.prep + self.measure

    def merge(self, other: "LocationCounter") -> None:
        self.gate_1q += other.gate_1q
        self.cnot += other.cnot
        self.prep += other.prep
        self.measure += other.measure
        self.conditional += other.conditional


ProbsLike = Union[NoiseModel, np.ndarray]


def _as_probs(noise: ProbsLike) -> np.ndarray:
    return noise.probs if isinstance(noise, NoiseModel) else np.asarray(noise)


def apply_pauli_channel(state: DensityMatrix, qubit: int, noise: ProbsLike):
    """One-qubit Pauli channel on a density matrix."""
    if not isinstance(state, DensityMatrix):
        raise UsageError("Pauli channels act on density matrices; densify first")
    probs = _as_probs(noise)
    mat = kernels.dm_pauli_channel(state.mat.copy(), state.num_qubits, qubit, probs)
    return DensityMatrix(mat, state.num_qubits)


def apply_noisy_gate(state, op: GateOp, model: NoiseModel,
                     counter: LocationCounter | None = None):
    """Gate followed by an independent channel on each qubit it touched.

    A pure input is returned pure when the model is noiseless, otherwise it
    is densified before the channels.
    """
    out = states.apply_gate(state, op)
    if counter is not None:
        if op.kind == "CNOT":
            counter.cnot += 1
        else:
            counter.gate_1q += 1
    if model.is_noiseless:
        return out
    if isinstance(out, PureState):
        out = out.to_density_matrix()
    for q in op.qubits:
        out = apply_pauli_channel(out, q, model)
    return out


def noisy_prep_zero(model: NoiseModel,
                    counter: LocationCounter | None = None) -> DensityMatrix:
    """Fresh one-qubit |0><0|, noisy when the model says preparations are."""
    state = DensityMatrix.zero(1)
    if model.noisy_prep:
        if counter is not None:
            counter.prep += 1
        if not model.is_noiseless:
            state = apply_pauli_channel(state, 0, model)
    return state


def noisy_measure_z(state, qubit: int, model: NoiseModel,
                    counter: LocationCounter | None = None):
    """Channel-then-readout Z measurement; returns measure_z branch list."""
    if model.noisy_measure:
        if counter is not None:
            counter.measure += 1
        if not model.is_noiseless:
            if isinstance(state, PureState):
                state = state.to_density_matrix()
            state = apply_pauli_channel(state, qubit, model)
    return states.measure_z(state, qubit)
