"""Fault-tolerant gadgets: Shor-state preparation, stabilizer measurement,
the twice-repeated error-correction cycle, and the teleported pi/8 gate.

Execution model
---------------
Classically conditioned evolution is tracked as a branch ensemble: a list of
(key, state) pairs where the key summarizes the classical record and states
are unnormalized (their trace or squared norm is the branch probability).
Branches whose keys agree are summed; the key construction guarantees that
branches are merged only when every later decision treats them identically,
so the merge is exact.

Two state paths exist per branch.  While a branch has seen no noise channel
it stays a pure vector and measurements use stabilizer projectors directly.
Density-matrix branches route stabilizer measurements through a cached
4-qubit-support instrument: the full noisy ancilla circuit (preparations,
entangling gates, couplings, readout channels) is compiled once per noise
model into a pair of support superoperators, one per syndrome outcome.
`measure_stabilizer_literal` keeps the uncompiled 11-qubit reference
implementation; the two must agree to near machine precision and are tested
against each other.

Register layouts: stabilizer measurement uses data 0..6 with ancillas 7..10;
teleportation uses data 0..6 with the resource block on 7..13, and the
measured data qubit is always at position 0 because collapsed qubits are
removed from the register.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels, steane
from .kernels import COMPLEX
from .noise import LocationCounter, NoiseModel, compose_pauli_probs
from .states import (DensityMatrix, GateOp, PureState, UsageError, diag_phase,
                     gate_matrix)
from .steane import GENERATOR_SUPPORTS, NUM_DATA

# Branches lighter than this fraction of the ensemble weight are dropped;
# the discarded weight is orders of magnitude below every tolerance used.
PRUNE_EPS = 1e-24

# Relative tolerance for treating two pure branches as the same ray.
_PROP_TOL = 1e-9

_THETA_BETA = np.exp(1j * np.pi / 4) / np.sqrt(2.0)


@dataclass(frozen=True)
class GenSpec:
    """One stabilizer generator: Pauli type ('Z' or 'X') and row index."""

    gen_type: str
    index: int

    def __post_init__(self):
        if self.gen_type not in ("Z", "X"):
            raise UsageError(f"generator type must be Z or X, not {self.gen_type!r}")
        if not 0 <= self.index < 3:
            raise UsageError(f"generator index {self.index} out of range")

    @property
    def support(self) -> tuple[int, ...]:
        return GENERATOR_SUPPORTS[self.index]


# Bit-flip syndromes (locating X errors) come from the Z-type generators,
# phase-flip syndromes from the X-type generators.
BF_GENS = tuple(GenSpec("Z", i) for i in range(3))
PF_GENS = tuple(GenSpec("X", i) for i in range(3))

ROUND_ORDERS = {
    "alternating": ("bf", "pf", "bf", "pf"),
    "pairs": ("bf", "bf", "pf", "pf"),
}


# --------------------------------------------------------------------------
# Structural circuits.  These op lists are the single source of truth for
# gate order, noise-location counting, circuit dumps, and the Monte-Carlo
# engine; the dense engine's compiled paths are tested against them.

def ghz_prep_ops(ancillas: Sequence[int]) -> list[GateOp]:
    """Four-qubit GHZ ladder: |0000> + |1111> up to normalization."""
    a = tuple(ancillas)
    if len(a) != 4:
        raise UsageError("the entangled ancilla uses exactly four qubits")
    ops = [GateOp("PrepZero", (q,)) for q in a]
    ops.append(GateOp("H", (a[0],)))
    ops.extend(GateOp("CNOT", (a[0], q)) for q in a[1:])
    return ops


def shor_prep_ops(ancillas: Sequence[int]) -> list[GateOp]:
    """Four-qubit entangled ancilla: GHZ then a Hadamard on every qubit."""
    a = tuple(ancillas)
    ops = ghz_prep_ops(a)
    ops.extend(GateOp("H", (q,)) for q in a)
    return ops


def stab_meas_ops(gen: GenSpec, ancillas: Sequence[int] = (7, 8, 9, 10)):
    """Full measurement circuit for one generator on data 0..6.

    Both types use the GHZ ladder plus a Hadamard on every ancilla qubit;
    the position of that Hadamard layer is what makes each type safe.
    Z-type generators put it before the data->ancilla couplings (the
    ancilla at coupling time is the Hadamard-dressed state, whose shifted
    readout reveals only the support parity) and read out directly.
    X-type generators couple the bare GHZ state as control into the data
    (so only the full generator, never a partial X pattern, is applied)
    and put the Hadamard layer at readout.  The syndrome bit is the XOR
    of the four readouts in both cases.
    """
    a = tuple(ancillas)
    ops = ghz_prep_ops(a)
    if gen.gen_type == "X":
        ops.extend(GateOp("CNOT", (a[j], s)) for j, s in enumerate(gen.support))
        ops.extend(GateOp("H", (q,)) for q in a)
    else:
        ops.extend(GateOp("H", (q,)) for q in a)
        ops.extend(GateOp("CNOT", (s, a[j])) for j, s in enumerate(gen.support))
    ops.extend(GateOp("MeasureZ", (q,)) for q in a)
    return ops


def qec_cycle_ops(round_order: str = "alternating") -> list[GateOp]:
    """Deterministic ops of a full cycle (recoveries are conditional and
    not part of this list)."""
    if round_order not in ROUND_ORDERS:
        raise UsageError(f"unknown round order {round_order!r}")
    ops = []
    for set_name in ROUND_ORDERS[round_order]:
        for gen in BF_GENS if set_name == "bf" else PF_GENS:
            ops.extend(stab_meas_ops(gen))
    return ops


def theta_prep_ops(offset: int = 0) -> list[GateOp]:
    """Noisy construction of the pi/8 resource block on qubits
    offset..offset+6: bare (|0> + e^{i pi/4}|1>)/sqrt(2) on the encoder
    input position, then the encoder."""
    ops = [GateOp("PrepZero", (offset + q,)) for q in range(NUM_DATA)]
    ops.append(GateOp("H", (offset + steane.ENCODER_INPUT,)))
    ops.append(GateOp("T", (offset + steane.ENCODER_INPUT,)))
    for op in steane.encoder_circuit():
        ops.append(GateOp(op.kind, tuple(offset + q for q in op.qubits)))
    return ops


def teleport_ops(include_theta: bool = True) -> list[GateOp]:
    """Deterministic ops of the teleported pi/8 gate on the 14-qubit
    layout (data 0..6 low, resource block 7..13 high)."""
    ops = theta_prep_ops(offset=NUM_DATA) if include_theta else []
    ops.extend(GateOp("CNOT", (NUM_DATA + k, k)) for k in range(NUM_DATA))
    ops.extend(GateOp("MeasureZ", (k,)) for k in range(NUM_DATA))
    return ops


def teleport_correction_ops() -> list[GateOp]:
    """Conditional fix-up for logical outcome 1: logical X then logical S
    (bitwise X then bitwise S-dagger)."""
    ops = [GateOp("X", (q,)) for q in range(NUM_DATA)]
    ops.extend(GateOp("Sdag", (q,)) for q in range(NUM_DATA))
    return ops


def count_channels(ops: Sequence[GateOp], model: NoiseModel,
                   counter: LocationCounter | None = None) -> int:
    """Structural error-location count of an op list under the model's
    location flags (independent of the error probabilities)."""
    c = counter if counter is not None else LocationCounter()
    for op in ops:
        if op.kind == "CNOT":
            c.cnot += 1
        elif op.kind == "PrepZero":
            if model.noisy_prep:
                c.prep += 1
        elif op.kind == "MeasureZ":
            if model.noisy_measure:
                c.measure += 1
        else:
            c.gate_1q += 1
    return c.total


def dump_ops(ops: Sequence[GateOp]) -> str:
    """Line-oriented trace: one op per line, kind then qubits."""
    return "\n".join(str(op) for op in ops)


# --------------------------------------------------------------------------
# Branch ensemble plumbing.

@dataclass
class Branch:
    """One classically conditioned component: unnormalized state + record key.

    pure=True means arr is an amplitude vector with squared norm equal to
    the branch weight; otherwise arr is a density matrix whose trace is the
    weight.  The stored weight mirrors that value.
    """

    arr: np.ndarray
    pure: bool
    num_qubits: int
    weight: float
    key: tuple = ()

    @classmethod
    def from_state(cls, state, key: tuple = ()) -> "Branch":
        if isinstance(state, PureState):
            return cls(state.vec.copy(), True, state.num_qubits,
                       state.norm_squared, key)
        return cls(state.mat.copy(), False, state.num_qubits, state.trace, key)

    def densify(self) -> None:
        if self.pure:
            self.arr = kernels.dm_from_vec(self.arr)
            self.pure = False

    def refresh_weight(self) -> float:
        if self.pure:
            self.weight = float(np.vdot(self.arr, self.arr).real)
        else:
            self.weight = float(kernels.dm_trace(self.arr).real)
        return self.weight

    def to_state(self):
        if self.pure:
            return PureState(self.arr.copy(), self.num_qubits)
        return DensityMatrix(self.arr.copy(), self.num_qubits)

    def copy(self) -> "Branch":
        return Branch(self.arr.copy(), self.pure, self.num_qubits,
                      self.weight, self.key)


class BranchEnsemble:
    """Ordered collection of branches; weights sum to the input weight."""

    def __init__(self, branches: Sequence[Branch]):
        self.branches = list(branches)

    @classmethod
    def from_state(cls, state) -> "BranchEnsemble":
        return cls([Branch.from_state(state)])

    @property
    def total_weight(self) -> float:
        return sum(b.weight for b in self.branches)

    def prune(self) -> None:
        cut = PRUNE_EPS * self.total_weight
        self.branches = [b for b in self.branches if b.weight > cut]


def _apply_op_raw(arr: np.ndarray, pure: bool, n: int, op: GateOp) -> np.ndarray:
    kind = op.kind
    if kind == "CNOT":
        fn = kernels.vec_apply_cnot if pure else kernels.dm_apply_cnot
        return fn(arr, n, op.qubits[0], op.qubits[1])
    if kind in ("X", "Y", "Z"):
        fn = kernels.vec_apply_pauli if pure else kernels.dm_apply_pauli
        return fn(arr, n, op.qubits[0], kind)
    phase = diag_phase(kind)
    if phase is not None:
        fn = kernels.vec_apply_phase if pure else kernels.dm_apply_diag
        return fn(arr, n, op.qubits[0], phase)
    fn = kernels.vec_apply_1q if pure else kernels.dm_apply_1q
    return fn(arr, n, op.qubits[0], gate_matrix(kind))


def _branch_noisy_ops(br: Branch, ops: Sequence[GateOp], model: NoiseModel):
    """Apply gates with a channel on each touched qubit; densifies a pure
    branch as soon as a nonzero channel is due."""
    noisy = not model.is_noiseless
    probs = model.probs
    for op in ops:
        if op.kind in ("PrepZero", "MeasureZ"):
            raise UsageError(f"{op.kind} cannot be applied as a gate")
        if noisy:
            br.densify()
        br.arr = _apply_op_raw(br.arr, br.pure, br.num_qubits, op)
        if noisy:
            for q in op.qubits:
                br.arr = kernels.dm_pauli_channel(br.arr, br.num_qubits, q, probs)


def _try_merge_pure(dst: Branch, src: Branch) -> bool:
    """Fold src into dst when both are pure and lie on the same ray."""
    n1, n2 = dst.weight, src.weight
    if n2 <= 0.0:
        return True
    if n1 <= 0.0:
        dst.arr = src.arr
        dst.weight = n2
        return True
    ip = np.vdot(dst.arr, src.arr)
    if abs(abs(ip) ** 2 - n1 * n2) <= _PROP_TOL * n1 * n2:
        dst.arr = dst.arr * np.sqrt((n1 + n2) / n1)
        dst.weight = n1 + n2
        return True
    return False


def _merge_into(table: dict, key: tuple, br: Branch) -> None:
    """Accumulate a branch into a key-indexed table, preserving purity when
    the states are proportional and densifying otherwise."""
    cur = table.get(key)
    if cur is None:
        br.key = key
        table[key] = br
        return
    if cur.pure and br.pure and _try_merge_pure(cur, br):
        return
    cur.densify()
    br.densify()
    cur.arr += br.arr
    cur.weight += br.weight


def resum_branches(branches: Sequence[Branch], key: tuple = ()) -> Branch:
    """Collapse an ensemble into a single branch (mixture sum)."""
    if not branches:
        raise UsageError("cannot resum an empty ensemble")
    order = sorted(range(len(branches)), key=lambda i: branches[i].key)
    out = branches[order[0]].copy()
    table = {key: out}
    out.key = key
    for i in order[1:]:
        _merge_into(table, key, branches[i].copy())
    return table[key]


# --------------------------------------------------------------------------
# Stabilizer measurement: projector path for noiseless pure branches,
# compiled instrument path for density matrices.

_INSTRUMENT_CACHE: dict = {}


def _instrument_key(gen_type: str, model: NoiseModel) -> tuple:
    return (gen_type, model.p_x, model.p_y, model.p_z,
            model.noisy_prep, model.noisy_measure)


def _build_instrument(gen_type: str, model: NoiseModel) -> np.ndarray:
    """Compile the noisy 8-qubit measurement circuit (4 support qubits +
    4 ancillas) into a stacked pair of support superoperators, one per
    syndrome outcome.

    The op list is derived from stab_meas_ops by relabeling, so the
    compiled circuit cannot drift from the committed structure.
    """
    probs = model.probs
    noisy = not model.is_noiseless
    d = 16

    # 256 support basis matrices E_(r,c), batch axis first
    basis = np.zeros((d * d, d, d), dtype=COMPLEX)
    idx = np.arange(d * d)
    basis[idx, idx // d, idx % d] = 1.0

    anc1 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=COMPLEX)
    if model.noisy_prep and noisy:
        anc1 = kernels.dm_pauli_channel(anc1, 1, 0, probs)
    anc4 = anc1
    for k in range(1, 4):
        anc4 = kernels.dm_join(anc4, k, anc1, 1)

    arr = kernels.dm_join(basis, 4, anc4, 4)

    gen = GenSpec(gen_type, 0)
    relabel = {s: j for j, s in enumerate(gen.support)}
    relabel.update({7 + j: 4 + j for j in range(4)})
    for op in stab_meas_ops(gen):
        qs = tuple(relabel[q] for q in op.qubits)
        if op.kind == "PrepZero":
            continue
        if op.kind == "MeasureZ":
            if model.noisy_measure and noisy:
                arr = kernels.dm_pauli_channel(arr, 8, qs[0], probs)
            continue
        if op.kind == "CNOT":
            arr = kernels.dm_apply_cnot(arr, 8, qs[0], qs[1])
        else:
            from .states import gate_matrix
            arr = kernels.dm_apply_1q(arr, 8, qs[0], gate_matrix(op.kind))
        if noisy:
            for q in qs:
                arr = kernels.dm_pauli_channel(arr, 8, q, probs)

    # project the ancilla register onto each readout word, bucket by parity
    a5 = arr.reshape(d * d, d, d, d, d)  # (input, anc_r, sup_r, anc_c, sup_c)
    buckets = np.zeros((2, d * d, d * d), dtype=COMPLEX)
    for w in range(d):
        par = bin(w).count("1") & 1
        buckets[par] += a5[:, w, :, w, :].reshape(d * d, d * d)
    # column e of the superop is the flattened output for basis input e
    return np.vstack([buckets[0].T, buckets[1].T])


def get_instrument(gen_type: str, model: NoiseModel) -> np.ndarray:
    key = _instrument_key(gen_type, model)
    inst = _INSTRUMENT_CACHE.get(key)
    if inst is None:
        inst = _build_instrument(gen_type, model)
        _INSTRUMENT_CACHE[key] = inst
    return inst


def _measure_branch(br: Branch, gen: GenSpec, model: NoiseModel):
    """One syndrome measurement on one branch -> [(bit, new Branch)]."""
    if br.num_qubits != NUM_DATA:
        raise UsageError("stabilizer measurement expects a 7-qubit block")
    if br.pure and model.is_noiseless:
        gv = br.arr.copy()
        for q in gen.support:
            gv = kernels.vec_apply_pauli(gv, NUM_DATA, q, gen.gen_type)
        outs = []
        for bit, v in ((0, 0.5 * (br.arr + gv)), (1, 0.5 * (br.arr - gv))):
            nb = Branch(v, True, NUM_DATA, float(np.vdot(v, v).real), br.key)
            outs.append((bit, nb))
        return outs
    br.densify()
    stacked = get_instrument(gen.gen_type, model)
    mats = kernels.dm_apply_support_superop(br.arr, NUM_DATA, gen.support, stacked)
    outs = []
    for bit, mat in enumerate(mats):
        w = float(kernels.dm_trace(mat).real)
        outs.append((bit, Branch(mat, False, NUM_DATA, w, br.key)))
    return outs


def measure_stabilizer(ens: BranchEnsemble, gen: GenSpec, model: NoiseModel,
                       key_update: Callable | None = None) -> BranchEnsemble:
    """Measure one generator across the ensemble, appending the syndrome
    bit to each branch key (or applying key_update) and merging equal keys."""
    table: dict = {}
    for br in ens.branches:
        for bit, nb in _measure_branch(br, gen, model):
            nk = key_update(br.key, bit) if key_update else br.key + (bit,)
            _merge_into(table, nk, nb)
    out = BranchEnsemble([table[k] for k in sorted(table)])
    out.prune()
    return out


def measure_stabilizer_literal(rho: DensityMatrix, gen: GenSpec,
                               model: NoiseModel):
    """Reference implementation on the full 11-qubit register; returns the
    two unnormalized 7-qubit post-states [(bit, DensityMatrix)].

    This is the semantic definition the compiled instrument is tested
    against; it is far too slow for production runs.
    """
    from . import noise as noise_mod
    from . import states as states_mod

    if rho.num_qubits != NUM_DATA:
        raise UsageError("expected a 7-qubit data block")
    state = rho.copy()
    for _ in range(4):
        anc = noise_mod.noisy_prep_zero(model)
        state = states_mod.tensor(state, anc)
    for op in stab_meas_ops(gen):
        if op.kind in ("PrepZero", "MeasureZ"):
            continue
        state = noise_mod.apply_noisy_gate(state, op, model)
    # measure the ancillas top-down, tracing each out after its projective
    # collapse, and XOR-bucket the 16 readout words into the syndrome bit
    pending = [(state, 0)]
    for _ in range(4):
        nxt = []
        for st, par in pending:
            top = st.num_qubits - 1
            for bit, _, post in noise_mod.noisy_measure_z(st, top, model):
                red = DensityMatrix(
                    kernels.dm_ptrace_qubit(post.mat, post.num_qubits, top),
                    post.num_qubits - 1)
                nxt.append((red, par ^ bit))
        pending = nxt
    buckets: list = [None, None]
    for st, par in pending:
        if buckets[par] is None:
            buckets[par] = st
        else:
            buckets[par] = DensityMatrix(buckets[par].mat + st.mat, NUM_DATA)
    return [(0, buckets[0]), (1, buckets[1])]


# --------------------------------------------------------------------------
# QEC cycle: both syndrome types measured twice, recovery only when the two
# rounds agree.

def _machine_update(state: tuple, bit: int) -> tuple:
    """Advance one error type's record machine by one syndrome bit.

    States: ("r1", bits) collecting round one; ("r2", r1, idx) comparing
    round two while still equal; ("r2f", idx) mismatch already seen;
    ("done", recovery) with recovery -1 for none or a qubit index.  The
    mismatch state drops the round-one bits, so every disagreeing history
    collapses into a single branch per comparison position.
    """
    tag = state[0]
    if tag == "r1":
        bits = state[1] + (bit,)
        if len(bits) < 3:
            return ("r1", bits)
        return ("r2", bits, 0)
    if tag == "r2":
        _, r1, idx = state
        match = bit == r1[idx]
        if idx == 2:
            if not match:
                return ("done", -1)
            pos = steane.decode_syndrome(r1)
            return ("done", -1 if pos is None else pos)
        return ("r2", r1, idx + 1) if match else ("r2f", idx + 1)
    if tag == "r2f":
        idx = state[1]
        return ("done", -1) if idx == 2 else ("r2f", idx + 1)
    raise UsageError(f"cannot update finished machine {state}")


_MACHINE_SLOT = {"bf": 0, "pf": 1}
_RECOVERY_KIND = {"bf": "X", "pf": "Z"}


def qec_cycle_branch(br: Branch, model: NoiseModel,
                     round_order: str = "alternating",
                     counter: LocationCounter | None = None) -> Branch:
    """Full cycle on one branch; returns a single weight-preserving branch."""
    if round_order not in ROUND_ORDERS:
        raise UsageError(f"unknown round order {round_order!r}")
    w_in = br.weight
    start_key = (("r1", ()), ("r1", ()))
    ens = BranchEnsemble([Branch(br.arr.copy(), br.pure, br.num_qubits,
                                 br.weight, start_key)])
    for set_name in ROUND_ORDERS[round_order]:
        slot = _MACHINE_SLOT[set_name]
        for gen in BF_GENS if set_name == "bf" else PF_GENS:
            if counter is not None:
                count_channels(stab_meas_ops(gen), model, counter)

            def upd(key, bit, slot=slot):
                lst = list(key)
                lst[slot] = _machine_update(key[slot], bit)
                return tuple(lst)

            ens = measure_stabilizer(ens, gen, model, key_update=upd)

    # recovery per terminal record, then exact resummation
    noisy_rec = model.noisy_recovery and not model.is_noiseless
    for b in ens.branches:
        ops = []
        for set_name in ("bf", "pf"):
            machine = b.key[_MACHINE_SLOT[set_name]]
            if machine[0] != "done":
                raise RuntimeError(f"record machine unfinished: {machine}")
            if machine[1] >= 0:
                ops.append(GateOp(_RECOVERY_KIND[set_name], (machine[1],)))
        if not ops:
            continue
        if noisy_rec:
            _branch_noisy_ops(b, ops, model)
            if counter is not None:
                counter.conditional += len(ops)
        else:
            for op in ops:
                b.arr = _apply_op_raw(b.arr, b.pure, b.num_qubits, op)
    out = resum_branches(ens.branches, key=br.key)
    out.refresh_weight()
    if abs(out.weight - w_in) > 1e-9 * max(w_in, 1.0):
        raise RuntimeError(
            f"cycle weight drifted: in {w_in}, out {out.weight}")
    return out


def qec_cycle(rho: DensityMatrix, model: NoiseModel,
              round_order: str = "alternating",
              counter: LocationCounter | None = None) -> DensityMatrix:
    """Spec-shaped wrapper: normalized density matrix in and out."""
    br = Branch.from_state(rho)
    out = qec_cycle_branch(br, model, round_order, counter)
    out.densify()
    return DensityMatrix(out.arr / out.weight, NUM_DATA)


# --------------------------------------------------------------------------
# Teleported pi/8 gate.

def prepare_shor_state(model: NoiseModel,
                       counter: LocationCounter | None = None) -> DensityMatrix:
    """Standalone noisy Shor-state construction on 4 qubits."""
    from . import noise as noise_mod
    from . import states as states_mod

    ops = shor_prep_ops((0, 1, 2, 3))
    if counter is not None:
        count_channels(ops, model, counter)
    state = None
    for _ in range(4):
        anc = noise_mod.noisy_prep_zero(model)
        state = anc if state is None else states_mod.tensor(state, anc)
    for op in ops:
        if op.kind == "PrepZero":
            continue
        state = noise_mod.apply_noisy_gate(state, op, model)
    return state


def prepare_theta_branch(model: NoiseModel) -> Branch:
    """The encoded (|0_L> + e^{i pi/4}|1_L>)/sqrt(2) resource block."""
    if model.ideal_theta_ancilla:
        return Branch.from_state(steane.encode_ideal(1 / np.sqrt(2.0), _THETA_BETA))
    if model.is_noiseless:
        vec = np.zeros(2**NUM_DATA, dtype=COMPLEX)
        vec[0] = 1.0
        br = Branch(vec, True, NUM_DATA, 1.0)
        ops = [op for op in theta_prep_ops() if op.kind != "PrepZero"]
        _branch_noisy_ops(br, ops, model)
        return br
    # noisy preparation: product of noisy |0> preps, then the noisy circuit
    prep1 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=COMPLEX)
    if model.noisy_prep:
        prep1 = kernels.dm_pauli_channel(prep1, 1, 0, model.probs)
    mat = prep1
    for k in range(1, NUM_DATA):
        mat = kernels.dm_join(mat, k, prep1, 1)
    br = Branch(mat, False, NUM_DATA, float(kernels.dm_trace(mat).real))
    ops = [op for op in theta_prep_ops() if op.kind != "PrepZero"]
    _branch_noisy_ops(br, ops, model)
    return br


def _teleport_classes_dense(data: np.ndarray, theta: np.ndarray,
                            model: NoiseModel) -> dict:
    """Density-matrix teleport core: returns {(syndrome, parity): dm 7q}.

    The measured data qubit is interleaved away immediately after its
    entangling gate (all removed ops commute with the remaining circuit),
    keeping the register at 14 - k qubits and the 14-qubit joint state
    implicit in the first step's blockwise construction.
    """
    gate = model.probs
    # target qubit sees the entangling gate's channel and then, if readouts
    # are noisy, the measurement channel; both sit between gate and collapse
    target = gate
    if model.noisy_measure and not model.is_noiseless:
        target = compose_pauli_probs(gate, gate)

    out0, out1 = kernels.dm_teleport_first_step(data, theta, target, gate)
    classes = {(0, 0): out0, (1, 1): out1}
    m = 13
    for k in range(1, NUM_DATA):
        nxt: dict = {}
        for key in sorted(classes):
            arr = classes.pop(key)
            synd, par = key
            o0, o1 = kernels.dm_teleport_step(arr, m, target, gate)
            del arr
            for bit, out in ((0, o0), (1, o1)):
                nk = (synd ^ (k + 1 if bit else 0), par ^ bit)
                if nk in nxt:
                    nxt[nk] += out
                else:
                    nxt[nk] = out
            del o0, o1
        m -= 1
        total = sum(float(kernels.dm_trace(a).real) for a in nxt.values())
        cut = PRUNE_EPS * total
        classes = {key: a for key, a in nxt.items()
                   if float(kernels.dm_trace(a).real) > cut}
    return classes


def _class_weight(arr: np.ndarray) -> float:
    if arr.ndim == 1:
        return float(np.vdot(arr, arr).real)
    return float(kernels.dm_trace(arr).real)


def _class_add(table: dict, key: tuple, arr: np.ndarray, m: int) -> None:
    """Accumulate a teleport class, keeping vectors pure while the states
    stay on one ray and densifying otherwise."""
    cur = table.get(key)
    if cur is None:
        table[key] = arr
        return
    if cur.ndim == 1 and arr.ndim == 1:
        b_cur = Branch(cur, True, m, _class_weight(cur))
        b_new = Branch(arr, True, m, _class_weight(arr))
        if _try_merge_pure(b_cur, b_new):
            table[key] = b_cur.arr
            return
        cur = kernels.dm_from_vec(cur)
        arr = kernels.dm_from_vec(arr)
    elif cur.ndim == 1:
        cur = kernels.dm_from_vec(cur)
    elif arr.ndim == 1:
        arr = kernels.dm_from_vec(arr)
    table[key] = cur + arr


def _teleport_classes_pure(data: np.ndarray, theta: np.ndarray) -> dict:
    """Noiseless teleport core on amplitude vectors.

    Classes normally stay pure (same-key outcome paths of a code-space
    input coincide); _class_add densifies a class only if that ever fails,
    trading speed for unconditional correctness.
    """
    v = kernels.vec_join(data, NUM_DATA, theta, NUM_DATA)
    classes = {(0, 0): v}
    m = 2 * NUM_DATA
    for k in range(NUM_DATA):
        nxt: dict = {}
        for key in sorted(classes):
            arr = classes.pop(key)
            synd, par = key
            if arr.ndim == 1:
                o0, o1 = kernels.vec_teleport_step(arr, m)
            else:
                ident = np.array([1.0, 0.0, 0.0, 0.0])
                o0, o1 = kernels.dm_teleport_step(arr, m, ident, ident)
            for bit, out in ((0, o0), (1, o1)):
                nk = (synd ^ (k + 1 if bit else 0), par ^ bit)
                _class_add(nxt, nk, out, m - 1)
        m -= 1
        total = sum(_class_weight(a) for a in nxt.values())
        cut = PRUNE_EPS * total
        classes = {key: a for key, a in nxt.items() if _class_weight(a) > cut}
    return classes


def t_gate_teleport_branch(br: Branch, model: NoiseModel,
                           counter: LocationCounter | None = None) -> Branch:
    """Teleported logical pi/8 gate on one branch; the resource block
    becomes the new data block."""
    if br.num_qubits != NUM_DATA:
        raise UsageError("teleportation expects a 7-qubit data block")
    if counter is not None:
        count_channels(teleport_ops(include_theta=not model.ideal_theta_ancilla),
                       model, counter)
    w_in = br.weight
    theta = prepare_theta_branch(model)

    if br.pure and theta.pure and model.is_noiseless:
        classes = _teleport_classes_pure(br.arr, theta.arr)
    else:
        br.densify()
        theta.densify()
        classes = _teleport_classes_dense(br.arr, theta.arr, model)

    noisy_rec = model.noisy_recovery and not model.is_noiseless
    fix = teleport_correction_ops()
    out_branches = []
    for key in sorted(classes):
        arr = classes[key]
        synd, par = key
        pure = arr.ndim == 1
        w = float(np.vdot(arr, arr).real) if pure \
            else float(kernels.dm_trace(arr).real)
        nb = Branch(arr, pure, NUM_DATA, w, key)
        outcome = par ^ (1 if synd != 0 else 0)
        if outcome == 1:
            if noisy_rec:
                _branch_noisy_ops(nb, fix, model)
                if counter is not None:
                    counter.conditional += len(fix)
            else:
                for op in fix:
                    nb.arr = _apply_op_raw(nb.arr, nb.pure, NUM_DATA, op)
        out_branches.append(nb)

    out = resum_branches(out_branches, key=br.key)
    out.refresh_weight()
    if abs(out.weight - w_in) > 1e-9 * max(w_in, 1.0):
        raise RuntimeError(
            f"teleportation weight drifted: in {w_in}, out {out.weight}")
    return out


def t_gate_teleport(rho: DensityMatrix, model: NoiseModel,
                    counter: LocationCounter | None = None) -> DensityMatrix:
    """Spec-shaped wrapper: normalized density matrix in and out."""
    br = Branch.from_state(rho)
    out = t_gate_teleport_branch(br, model, counter)
    out.densify()
    return DensityMatrix(out.arr / out.weight, NUM_DATA)


def transversal_branch(br: Branch, kind: str, model: NoiseModel,
                       counter: LocationCounter | None = None) -> Branch:
    """Bitwise logical Clifford on one branch."""
    ops = steane.transversal_circuit(kind)
    if counter is not None:
        count_channels(ops, model, counter)
    _branch_noisy_ops(br, ops, model)
    br.refresh_weight()
    return br


def transversal_logical_gate(rho: DensityMatrix, kind: str, model: NoiseModel,
                             counter: LocationCounter | None = None):
    """Spec-shaped wrapper around transversal_branch."""
    br = Branch.from_state(rho)
    out = transversal_branch(br, kind, model, counter)
    out.densify()
    return DensityMatrix(out.arr, NUM_DATA)
