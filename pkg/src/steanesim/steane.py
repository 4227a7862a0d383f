"""Seven-qubit CSS code: stabilizer tables, logical operators, encoder,
and classical decoding helpers.

Qubits are 0-indexed here; the classical Hamming structure is clearest
1-indexed (position j has check vector binary(j)), so the two conventions
meet at position = qubit + 1.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .kernels import COMPLEX
from .states import GateOp, PureState, UsageError

NUM_DATA = 7

# Parity-check supports shared by the X-type and Z-type generators,
# 0-indexed.  Generator i checks the positions whose (1-indexed) binary
# expansion has bit (2 - i) set.
GENERATOR_SUPPORTS = ((3, 4, 5, 6), (1, 2, 5, 6), (0, 2, 4, 6))

# Qubit the encoder expects the bare input state on.
ENCODER_INPUT = 6


def _support_masks() -> list[int]:
    return [sum(1 << q for q in s) for s in GENERATOR_SUPPORTS]


def codeword_strings() -> list[int]:
    """The eight bitmasks whose equal superposition is logical zero: the
    span of the X-generator supports."""
    masks = _support_masks()
    words = []
    for sel in range(8):
        w = 0
        for i in range(3):
            if (sel >> i) & 1:
                w ^= masks[i]
        words.append(w)
    return sorted(words)


def logical_basis() -> tuple[np.ndarray, np.ndarray]:
    """(|0_L>, |1_L>) as 128-amplitude vectors."""
    zero = np.zeros(2**NUM_DATA, dtype=COMPLEX)
    for w in codeword_strings():
        zero[w] = 1.0
    zero /= np.sqrt(8.0)
    one = np.zeros_like(zero)
    full = 2**NUM_DATA - 1
    for w in codeword_strings():
        one[w ^ full] = 1.0 / np.sqrt(8.0)
    return zero, one


def encode_ideal(alpha: complex, beta: complex) -> PureState:
    """alpha |0_L> + beta |1_L> written down directly."""
    zero, one = logical_basis()
    return PureState(alpha * zero + beta * one, NUM_DATA)


def encoder_circuit() -> list[GateOp]:
    """Unitary encoder: input on qubit ENCODER_INPUT, |0> on the rest.

    Three Hadamards fan out the stabilizer superposition; the first two
    CNOTs copy the input across its logical-X support {1, 4, 6}.
    """
    ops = [
        GateOp("CNOT", (6, 1)),
        GateOp("CNOT", (6, 4)),
        GateOp("H", (3,)),
        GateOp("CNOT", (3, 4)),
        GateOp("CNOT", (3, 5)),
        GateOp("CNOT", (3, 6)),
        GateOp("H", (2,)),
        GateOp("CNOT", (2, 1)),
        GateOp("CNOT", (2, 5)),
        GateOp("CNOT", (2, 6)),
        GateOp("H", (0,)),
        GateOp("CNOT", (0, 1)),
        GateOp("CNOT", (0, 4)),
        GateOp("CNOT", (0, 5)),
    ]
    return ops


# Bitwise implementations of the logical one-qubit gates.  The phase gate
# acts logically as the bitwise inverse phase gate (and vice versa); the
# pi/8 gate has no bitwise form and needs the teleportation gadget.
_TRANSVERSAL = {
    "X": "X",
    "Y": "Y",
    "Z": "Z",
    "H": "H",
    "P": "Pdag",
    "S": "Sdag",
    "Pdag": "P",
    "Sdag": "S",
}


def transversal_circuit(kind: str, qubits: Sequence[int] | None = None):
    """GateOps applying the logical gate `kind` bitwise over the block."""
    if kind not in _TRANSVERSAL:
        raise UsageError(f"logical {kind} has no bitwise implementation")
    qs = tuple(range(NUM_DATA)) if qubits is None else tuple(qubits)
    if len(qs) != NUM_DATA:
        raise UsageError(f"need {NUM_DATA} qubits, got {len(qs)}")
    return [GateOp(_TRANSVERSAL[kind], (q,)) for q in qs]


def transversal_cnot(controls: Sequence[int], targets: Sequence[int]):
    """Pairwise CNOTs implementing a logical CNOT between two blocks."""
    if len(controls) != NUM_DATA or len(targets) != NUM_DATA:
        raise UsageError("logical CNOT needs two full blocks")
    return [GateOp("CNOT", (c, t)) for c, t in zip(controls, targets)]


def decode_syndrome(bits: Sequence[int]) -> int | None:
    """Map three syndrome bits to the flipped qubit, None for trivial."""
    s1, s2, s3 = (int(b) & 1 for b in bits)
    position = 4 * s1 + 2 * s2 + s3
    return None if position == 0 else position - 1


def classical_syndrome(word: int) -> int:
    """Hamming check value of a 7-bit measurement word (qubit k = bit k):
    XOR of the 1-indexed positions of the set bits."""
    s = 0
    for q in range(NUM_DATA):
        if (word >> q) & 1:
            s ^= q + 1
    return s


def classical_correct_and_parity(word: int) -> int:
    """Correct one bit flip classically, then return the word's parity.

    This is the logical Z readout of a destructively measured block: valid
    codewords decode to parity directly, a single flipped bit is located by
    the check value and toggled first.
    """
    s = classical_syndrome(word)
    if s != 0:
        word ^= 1 << (s - 1)
    return bin(word).count("1") & 1
