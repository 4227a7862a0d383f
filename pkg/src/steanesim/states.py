"""State containers and the elementary operations on them.

Two representations are supported: :class:`PureState` (amplitude vector) and
:class:`DensityMatrix`.  Qubit 0 is the least significant bit of the flat
index.  Registers are capped at 14 qubits, which bounds the largest dense
object to one 2**14 x 2**14 complex grid.

States are allowed to be unnormalized: measurement branches carry their
probability as their trace (or squared norm), which keeps mixture bookkeeping
exact without renormalization error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from . import kernels
from .kernels import COMPLEX

MAX_QUBITS = 14

_SQ2 = 1.0 / np.sqrt(2.0)

# 2x2 unitaries for the single-qubit gate kinds.  P and S are the same phase
# gate diag(1, i); both spellings are accepted.
_H = np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=COMPLEX)
_X = np.array([[0, 1], [1, 0]], dtype=COMPLEX)
_Y = np.array([[0, -1j], [1j, 0]], dtype=COMPLEX)
_Z = np.array([[1, 0], [0, -1]], dtype=COMPLEX)

_DIAG_PHASES = {
    "P": 1j,
    "S": 1j,
    "Pdag": -1j,
    "Sdag": -1j,
    "T": np.exp(1j * np.pi / 4),
    "Tdag": np.exp(-1j * np.pi / 4),
    "Z": -1.0,
}

_MATRICES = {"H": _H, "X": _X, "Y": _Y, "Z": _Z}

GATE_KINDS_1Q = ("H", "P", "Pdag", "T", "Tdag", "X", "Y", "Z", "S", "Sdag")
GATE_KINDS = GATE_KINDS_1Q + ("CNOT", "PrepZero", "MeasureZ")


class CapacityError(RuntimeError):
    """Raised when an operation would exceed the 14-qubit register cap."""


class UsageError(ValueError):
    """Raised for malformed operations (bad qubit index, wrong arity, ...)."""


def diag_phase(kind: str):
    """Phase of diag(1, phase) gates; None for non-diagonal kinds."""
    return _DIAG_PHASES.get(kind)


def gate_matrix(kind: str) -> np.ndarray:
    """The 2x2 unitary for a single-qubit gate kind."""
    if kind in _MATRICES:
        return _MATRICES[kind]
    if kind in _DIAG_PHASES:
        return np.array([[1, 0], [0, _DIAG_PHASES[kind]]], dtype=COMPLEX)
    raise UsageError(f"no single-qubit matrix for gate kind {kind!r}")


@dataclass(frozen=True)
class GateOp:
    """One circuit operation: a gate kind plus the qubits it acts on.

    CNOT lists (control, target).  PrepZero and MeasureZ are markers for
    noise-location accounting and circuit dumps; apply_gate rejects them.
    """

    kind: str
    qubits: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise UsageError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind == "CNOT" else 1
        if len(self.qubits) != arity:
            raise UsageError(f"{self.kind} takes {arity} qubit(s), got {self.qubits}")
        if self.kind == "CNOT" and self.qubits[0] == self.qubits[1]:
            raise UsageError("CNOT control and target must differ")

    def __str__(self) -> str:
        return f"{self.kind} {' '.join(str(q) for q in self.qubits)}"


def _check_register(num_qubits: int) -> None:
    if num_qubits < 1:
        raise UsageError("register needs at least one qubit")
    if num_qubits > MAX_QUBITS:
        raise CapacityError(
            f"{num_qubits} qubits exceeds the {MAX_QUBITS}-qubit cap"
        )


class PureState:
    """Amplitude vector over n qubits, possibly unnormalized."""

    def __init__(self, amplitudes: np.ndarray, num_qubits: int | None = None):
        vec = np.asarray(amplitudes, dtype=COMPLEX)
        if vec.ndim != 1:
            raise UsageError("amplitudes must be one-dimensional")
        n = int(np.log2(vec.size)) if num_qubits is None else num_qubits
        if 2**n != vec.size:
            raise UsageError(f"amplitude count {vec.size} is not 2**{n}")
        _check_register(n)
        self.vec = vec
        self.num_qubits = n

    @classmethod
    def zero(cls, num_qubits: int) -> "PureState":
        _check_register(num_qubits)
        vec = np.zeros(2**num_qubits, dtype=COMPLEX)
        vec[0] = 1.0
        return cls(vec, num_qubits)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "PureState":
        """Computational basis state; bits[k] is the value of qubit k."""
        n = len(bits)
        _check_register(n)
        idx = sum(b << k for k, b in enumerate(bits))
        vec = np.zeros(2**n, dtype=COMPLEX)
        vec[idx] = 1.0
        return cls(vec, n)

    def copy(self) -> "PureState":
        return PureState(self.vec.copy(), self.num_qubits)

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.vec, self.vec).real)

    def normalized(self) -> "PureState":
        w = self.norm_squared
        if w <= 0.0:
            raise UsageError("cannot normalize a zero state")
        return PureState(self.vec / np.sqrt(w), self.num_qubits)

    def to_density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(kernels.dm_from_vec(self.vec), self.num_qubits)


class DensityMatrix:
    """Dense density matrix over n qubits, possibly unnormalized."""

    def __init__(self, matrix: np.ndarray, num_qubits: int | None = None):
        mat = np.asarray(matrix, dtype=COMPLEX)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise UsageError("density matrix must be square")
        n = int(np.log2(mat.shape[0])) if num_qubits is None else num_qubits
        if 2**n != mat.shape[0]:
            raise UsageError(f"dimension {mat.shape[0]} is not 2**{n}")
        _check_register(n)
        self.mat = mat
        self.num_qubits = n

    @classmethod
    def zero(cls, num_qubits: int) -> "DensityMatrix":
        return PureState.zero(num_qubits).to_density_matrix()

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self.mat.copy(), self.num_qubits)

    @property
    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def normalized(self) -> "DensityMatrix":
        t = self.trace
        if t <= 0.0:
            raise UsageError("cannot normalize a zero-trace matrix")
        return DensityMatrix(self.mat / t, self.num_qubits)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.mat - self.mat.conj().T)))


State = Union[PureState, DensityMatrix]


def apply_gate(state: State, op: GateOp) -> State:
    """Apply a unitary GateOp; preserves the input representation."""
    if op.kind in ("PrepZero", "MeasureZ"):
        raise UsageError(f"{op.kind} is not unitary; use the noise/gadget layer")
    n = state.num_qubits
    for q in op.qubits:
        if not 0 <= q < n:
            raise UsageError(f"qubit {q} out of range for {n}-qubit register")
    if isinstance(state, PureState):
        vec = state.vec.copy()
        if op.kind == "CNOT":
            vec = kernels.vec_apply_cnot(vec, n, op.qubits[0], op.qubits[1])
        elif op.kind in ("X", "Y", "Z"):
            vec = kernels.vec_apply_pauli(vec, n, op.qubits[0], op.kind)
        elif op.kind in _DIAG_PHASES:
            vec = kernels.vec_apply_phase(vec, n, op.qubits[0], _DIAG_PHASES[op.kind])
        else:
            vec = kernels.vec_apply_1q(vec, n, op.qubits[0], gate_matrix(op.kind))
        return PureState(vec, n)
    mat = state.mat.copy()
    if op.kind == "CNOT":
        mat = kernels.dm_apply_cnot(mat, n, op.qubits[0], op.qubits[1])
    elif op.kind in ("X", "Y", "Z"):
        mat = kernels.dm_apply_pauli(mat, n, op.qubits[0], op.kind)
    elif op.kind in _DIAG_PHASES:
        mat = kernels.dm_apply_diag(mat, n, op.qubits[0], _DIAG_PHASES[op.kind])
    else:
        mat = kernels.dm_apply_1q(mat, n, op.qubits[0], gate_matrix(op.kind))
    return DensityMatrix(mat, n)


def apply_circuit(state: State, ops: Iterable[GateOp]) -> State:
    for op in ops:
        state = apply_gate(state, op)
    return state


def tensor(a: State, b: State) -> State:
    """Tensor product with a's qubits as the low-order block.

    Pure x pure stays pure; any density-matrix input densifies the result.
    """
    n = a.num_qubits + b.num_qubits
    _check_register(n)
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(
            kernels.vec_join(a.vec, a.num_qubits, b.vec, b.num_qubits), n
        )
    am = a.mat if isinstance(a, DensityMatrix) else a.to_density_matrix().mat
    bm = b.mat if isinstance(b, DensityMatrix) else b.to_density_matrix().mat
    return DensityMatrix(kernels.dm_join(am, a.num_qubits, bm, b.num_qubits), n)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Trace out all qubits not in keep; kept qubits are relabeled in
    ascending order of their old indices."""
    keep_set = sorted(set(keep))
    if keep_set and (keep_set[0] < 0 or keep_set[-1] >= rho.num_qubits):
        raise UsageError(f"keep set {keep} out of range")
    if not keep_set:
        raise UsageError("must keep at least one qubit")
    mat, n = rho.mat, rho.num_qubits
    # removing from the highest index down keeps lower labels stable
    for q in range(n - 1, -1, -1):
        if q not in keep_set:
            mat = kernels.dm_ptrace_qubit(mat, n, q)
            n -= 1
    return DensityMatrix(mat, n)


def measure_z(state: State, qubit: int):
    """Measure one qubit in the Z basis.

    Returns [(0, w0, post0), (1, w1, post1)] where the posts are the
    unnormalized projected states (register size unchanged) and the weights
    are their traces.  Zero-weight branches are included.
    """
    n = state.num_qubits
    if not 0 <= qubit < n:
        raise UsageError(f"qubit {qubit} out of range")
    results = []
    if isinstance(state, PureState):
        for bit in (0, 1):
            post = kernels.vec_project_keep(state.vec.copy(), n, qubit, bit)
            w = float(np.vdot(post, post).real)
            results.append((bit, w, PureState(post, n)))
    else:
        for bit in (0, 1):
            post = kernels.dm_project_keep(state.mat, n, qubit, bit)
            w = float(np.trace(post).real)
            results.append((bit, w, DensityMatrix(post, n)))
    return results


def fidelity(ideal: PureState, actual: State) -> float:
    """Overlap fidelity <psi|rho|psi> against a pure reference.

    Equals Tr[rho_ideal rho_actual] for a pure ideal state.  The value is
    clamped to [0, 1] after a small-tolerance sanity check.
    """
    if ideal.num_qubits != actual.num_qubits:
        raise UsageError("register sizes differ")
    if isinstance(actual, PureState):
        f = float(np.abs(np.vdot(ideal.vec, actual.vec)) ** 2)
    else:
        f = float(np.real(np.vdot(ideal.vec, actual.mat @ ideal.vec)))
    if f < -1e-9 or f > 1.0 + 1e-9:
        raise UsageError(f"fidelity {f} outside [0, 1] beyond tolerance")
    return min(1.0, max(0.0, f))
