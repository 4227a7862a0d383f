"""Monte-Carlo trajectory engine.

Each trajectory is a pure-state sample of the same noisy circuit the
dense engine integrates exactly: every noise location draws one of
{I, X, Y, Z} with the model probabilities, every measurement draws one
outcome with its Born probability, and the trajectory mean of
|<ideal|final>|^2 estimates the dense fidelity.  Trajectory t runs on a
counter-derived Philox stream keyed by (base_seed, t), so results do not
depend on execution order or the degree of parallelism.
"""

from __future__ import annotations

import numpy as np

from . import gadgets, kernels, steane
from .noise import NoiseModel
from .schedule import (GateSequence, LogicalInput, QecSchedule,
                       ideal_final_state)
from .states import GateOp, UsageError, diag_phase, gate_matrix

_H = gate_matrix("H")
_H_CONJ = {"X": "Z", "Z": "X", "Y": "Y"}
_MASK64 = (1 << 64) - 1
_EMPTY_U = np.empty(0)
_RNG_BLOCK = 1024

# fixed accumulation block: partial sums are always reduced per block and
# then in block order, so the result is identical for any worker count
CHUNK = 1024


def _stab_parts(gen: gadgets.GenSpec) -> tuple:
    """Split one measurement gadget into (ancilla prep on a private
    4-qubit register, coupling gates, x_basis readout flag).

    The ancilla is unentangled with the data until the couplings, so its
    prep runs on 16 amplitudes instead of the joined register.  A post-
    coupling op layer is only ever the X-type readout Hadamards; those
    fold into the fused X-basis projection.  Derived from the committed
    gadget circuit so the structure cannot drift.
    """
    key = (gen.gen_type, gen.index)
    parts = _STAB_PARTS_CACHE.get(key)
    if parts is not None:
        return parts
    lowest_anc = gadgets.NUM_DATA
    prep: list[GateOp] = []
    couple: list[GateOp] = []
    post: list[GateOp] = []
    seen_couple = False
    for op in gadgets.stab_meas_ops(gen):
        if op.kind == "MeasureZ":
            continue
        if all(q >= lowest_anc for q in op.qubits):
            if not seen_couple:
                prep.append(GateOp(op.kind,
                                   tuple(q - lowest_anc for q in op.qubits)))
            else:
                post.append(op)
        else:
            seen_couple = True
            couple.append(op)
    if post and (len(post) != 4 or any(op.kind != "H" for op in post)):
        raise RuntimeError("unexpected post-coupling ancilla layer")
    parts = (tuple(prep), tuple(couple), bool(post))
    _STAB_PARTS_CACHE[key] = parts
    return parts


_STAB_PARTS_CACHE: dict = {}
_THETA_OPS = None
_FIX_OPS = None
_TRANSVERSAL_OPS: dict = {}


def _theta_ops() -> tuple:
    global _THETA_OPS
    if _THETA_OPS is None:
        _THETA_OPS = tuple(gadgets.theta_prep_ops(offset=0))
    return _THETA_OPS


def _fix_ops() -> tuple:
    global _FIX_OPS
    if _FIX_OPS is None:
        _FIX_OPS = tuple(gadgets.teleport_correction_ops())
    return _FIX_OPS


def _transversal_ops(kind: str) -> tuple:
    ops = _TRANSVERSAL_OPS.get(kind)
    if ops is None:
        ops = tuple(steane.transversal_circuit(kind))
        _TRANSVERSAL_OPS[kind] = ops
    return ops


class _Traj:
    """Mutable pure register plus the trajectory's RNG stream."""

    __slots__ = ("vec", "n", "rng", "model", "_cum", "_noisy", "conditional",
                 "_ubuf", "_ui")

    def __init__(self, vec: np.ndarray, n: int, rng, model: NoiseModel):
        self.vec = np.array(vec, dtype=np.complex128)
        self.n = n
        self.rng = rng
        self.model = model
        p = model.probs
        self._cum = (float(p[1]), float(p[1] + p[2]),
                     float(p[1] + p[2] + p[3]))
        self._noisy = not model.is_noiseless
        self.conditional = 0
        self._ubuf = _EMPTY_U
        self._ui = 0

    def _u(self) -> float:
        """Next uniform draw, from a block buffer (same stream as scalar
        draws; blocks only amortize the generator call)."""
        i = self._ui
        if i >= self._ubuf.shape[0]:
            self._ubuf = self.rng.random(_RNG_BLOCK)
            i = 0
        self._ui = i + 1
        return self._ubuf[i]

    def sample_pauli(self) -> str | None:
        cx, cy, cz = self._cum
        u = self._u()
        if u >= cz:
            return None
        if u < cx:
            return "X"
        if u < cy:
            return "Y"
        return "Z"

    def channel(self, q: int) -> None:
        w = self.sample_pauli()
        if w is not None:
            kernels.vec_apply_pauli(self.vec, self.n, q, w)

    def _grow_zero(self) -> None:
        v = np.zeros(2 * self.vec.shape[0], dtype=np.complex128)
        v[: self.vec.shape[0]] = self.vec
        self.vec = v
        self.n += 1

    def apply_raw(self, op: GateOp) -> None:
        kind = op.kind
        if kind == "CNOT":
            kernels.vec_apply_cnot(self.vec, self.n, op.qubits[0], op.qubits[1])
        elif kind == "H":
            kernels.vec_apply_h(self.vec, self.n, op.qubits[0])
        elif kind in ("X", "Y", "Z"):
            kernels.vec_apply_pauli(self.vec, self.n, op.qubits[0], kind)
        elif kind == "PrepZero":
            if op.qubits[0] != self.n:
                raise UsageError("preparations must extend the register upward")
            self._grow_zero()
        elif kind == "MeasureZ":
            raise UsageError("measurements are sampled via measure()")
        else:
            kernels.vec_apply_phase(self.vec, self.n, op.qubits[0],
                                    diag_phase(kind))

    def apply(self, op: GateOp) -> None:
        """Structural op followed by its sampled noise, per the location
        policy (CNOT hits both participants, preps only if noisy_prep)."""
        self.apply_raw(op)
        if not self._noisy:
            return
        if op.kind == "CNOT":
            self.channel(op.qubits[0])
            self.channel(op.qubits[1])
        elif op.kind == "PrepZero":
            if self.model.noisy_prep:
                self.channel(op.qubits[0])
        else:
            self.channel(op.qubits[0])

    def measure(self, q: int) -> int:
        """Readout channel, sampled collapse, removal of qubit q.

        The register is renormalized from the branch weight (no second
        norm pass); the running norm stays 1 up to float drift, which the
        final-overlap normalization absorbs.
        """
        if self._noisy and self.model.noisy_measure:
            self.channel(q)
        norm2 = float(np.vdot(self.vec, self.vec).real)
        w1 = float(kernels.vec_prob_one(self.vec, self.n, q))
        bit = 1 if self._u() * norm2 < w1 else 0
        self.vec = kernels.vec_collapse(self.vec, self.n, q, bit)
        self.n -= 1
        w = w1 if bit else norm2 - w1
        self.vec *= 1.0 / np.sqrt(w)
        return bit

    def measure_x(self, q: int) -> int:
        """X-basis readout of qubit q (a Hadamard then a Z readout), with
        the Hadamard folded into the projection.

        The folded Hadamard's own gate channel and the readout channel
        both sit after it in the literal circuit, so they are applied
        before the projection as their H-conjugates (HXH = Z, HZH = X,
        HYH = -Y; the sign is a global phase on a pure trajectory).
        """
        if self._noisy:
            w = self.sample_pauli()
            if w is not None:
                kernels.vec_apply_pauli(self.vec, self.n, q, _H_CONJ[w])
            if self.model.noisy_measure:
                w = self.sample_pauli()
                if w is not None:
                    kernels.vec_apply_pauli(self.vec, self.n, q, _H_CONJ[w])
        plus, minus = kernels.vec_measure_x_split(self.vec, self.n, q)
        wp = 0.5 * float(np.vdot(plus, plus).real)
        wm = 0.5 * float(np.vdot(minus, minus).real)
        bit = 1 if self._u() * (wp + wm) < wm else 0
        self.vec = minus if bit else plus
        self.n -= 1
        self.vec *= 1.0 / np.sqrt(2.0 * (wm if bit else wp))
        return bit


def _measure_generator(traj: _Traj, gen: gadgets.GenSpec) -> int:
    """One stabilizer readout: prep the ancilla factor on its own
    register, join, couple, measure the four ancillas (top-down; XOR is
    order-free), return the syndrome bit."""
    prep, couple, x_basis = _stab_parts(gen)
    main_vec, main_n = traj.vec, traj.n
    traj.vec = np.ones(1, dtype=np.complex128)
    traj.n = 0
    for op in prep:
        traj.apply(op)
    traj.vec = kernels.vec_join(main_vec, main_n, traj.vec, traj.n)
    traj.n += main_n
    for op in couple:
        traj.apply(op)
    bit = 0
    if x_basis:
        for _ in range(4):
            bit ^= traj.measure_x(traj.n - 1)
    else:
        for _ in range(4):
            bit ^= traj.measure(traj.n - 1)
    return bit


def qec_cycle_traj(traj: _Traj, round_order: str = "alternating") -> None:
    """Sampled QEC cycle: two rounds per generator set, recovery only on
    repeat agreement, mirroring the dense cycle's record logic."""
    if round_order not in gadgets.ROUND_ORDERS:
        raise UsageError(f"unknown round order {round_order!r}")
    rounds: dict[str, list[tuple[int, ...]]] = {"bf": [], "pf": []}
    for set_name in gadgets.ROUND_ORDERS[round_order]:
        gens = gadgets.BF_GENS if set_name == "bf" else gadgets.PF_GENS
        rounds[set_name].append(
            tuple(_measure_generator(traj, gen) for gen in gens))
    noisy_rec = traj.model.noisy_recovery and not traj.model.is_noiseless
    for set_name in ("bf", "pf"):
        r1, r2 = rounds[set_name]
        if r1 != r2:
            continue
        pos = steane.decode_syndrome(r1)
        if pos is None:
            continue
        op = GateOp("X" if set_name == "bf" else "Z", (pos,))
        if noisy_rec:
            traj.apply(op)
            traj.conditional += 1
        else:
            traj.apply_raw(op)


def t_gate_traj(traj: _Traj) -> None:
    """Sampled teleported pi/8 gate; the resource block becomes the data.

    Each entangling gate is followed immediately by its data-qubit
    readout (the removed ops commute with the rest of the circuit), so
    the register shrinks back toward 7 qubits as it goes; after k
    removals the pair (7+k, k) sits at (7, 0).
    """
    model = traj.model
    if traj.n != gadgets.NUM_DATA:
        raise UsageError("teleportation expects a 7-qubit data block")
    if model.ideal_theta_ancilla:
        theta = steane.encode_ideal(1 / np.sqrt(2.0),
                                    np.exp(1j * np.pi / 4) / np.sqrt(2.0))
        traj.vec = kernels.vec_join(traj.vec, traj.n, theta.vec, theta.num_qubits)
        traj.n += theta.num_qubits
    else:
        # the resource block is unentangled until the couplings; prep it
        # on its own 7-qubit register, then join above the data
        main_vec, main_n = traj.vec, traj.n
        traj.vec = np.ones(1, dtype=np.complex128)
        traj.n = 0
        for op in _theta_ops():
            traj.apply(op)
        traj.vec = kernels.vec_join(main_vec, main_n, traj.vec, traj.n)
        traj.n += main_n
    word = 0
    for k in range(gadgets.NUM_DATA):
        traj.apply(GateOp("CNOT", (gadgets.NUM_DATA, 0)))
        word |= traj.measure(0) << k
    parity = bin(word).count("1") & 1
    outcome = parity ^ (1 if steane.classical_syndrome(word) != 0 else 0)
    if outcome == 1:
        fix = _fix_ops()
        noisy_rec = model.noisy_recovery and not model.is_noiseless
        for op in fix:
            if noisy_rec:
                traj.apply(op)
            else:
                traj.apply_raw(op)
        if noisy_rec:
            traj.conditional += len(fix)


def run_trajectory(seq: GateSequence, schedule: QecSchedule, model: NoiseModel,
                   inp: LogicalInput, base_seed: int, t: int,
                   round_order: str = "alternating") -> float:
    """One sampled run; returns |<ideal|final>|^2 for this trajectory."""
    key = np.array([base_seed & _MASK64, t & _MASK64], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    start = steane.encode_ideal(inp.alpha, inp.beta)
    traj = _Traj(start.vec, start.num_qubits, rng, model)
    points = frozenset(schedule.insertion_points)
    for i, kind in enumerate(seq.expanded, start=1):
        if kind == "T":
            t_gate_traj(traj)
        else:
            for op in _transversal_ops(kind):
                traj.apply(op)
        if i in points:
            qec_cycle_traj(traj, round_order)
    ideal = ideal_final_state(seq, inp)
    norm2 = float(np.vdot(traj.vec, traj.vec).real)
    return float(np.abs(np.vdot(ideal.vec, traj.vec)) ** 2) / norm2


def _chunk_stats(args) -> tuple[float, float]:
    """Sum and sum of squares of the overlaps for trajectories [t0, t1)."""
    seq, schedule, model, inp, base_seed, t0, t1, round_order = args
    s = 0.0
    s2 = 0.0
    for t in range(t0, t1):
        f = run_trajectory(seq, schedule, model, inp, base_seed, t, round_order)
        s += f
        s2 += f * f
    return s, s2


def run_trajectories(seq: GateSequence, schedule: QecSchedule,
                     model: NoiseModel, inp: LogicalInput, n_traj: int,
                     base_seed: int, round_order: str = "alternating",
                     jobs: int = 1) -> tuple[float, float]:
    """Estimate (F_hat, stderr) from n_traj independent samples.

    Partial sums are always reduced in fixed-size blocks in block order,
    so the floating-point result is independent of the worker count.
    """
    if n_traj < 1:
        raise UsageError("n_traj must be at least 1")
    chunks = [(seq, schedule, model, inp, base_seed, t0,
               min(t0 + CHUNK, n_traj), round_order)
              for t0 in range(0, n_traj, CHUNK)]
    if jobs > 1 and len(chunks) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            partials = list(pool.map(_chunk_stats, chunks))
    else:
        partials = [_chunk_stats(c) for c in chunks]
    s = 0.0
    s2 = 0.0
    for ps, ps2 in partials:
        s += ps
        s2 += ps2
    mean = s / n_traj
    if n_traj < 2:
        return mean, 0.0
    var = max(0.0, (s2 - n_traj * mean * mean) / (n_traj - 1))
    return mean, float(np.sqrt(var / n_traj))
