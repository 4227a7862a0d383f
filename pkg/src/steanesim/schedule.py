"""Logical gate sequence, QEC cadences, and the dense run driver.

The benchmark circuit is a string over the composite alphabet {A, B} with
A = HPT and B = HT as operator products, i.e. A applies T, then P, then H.
The default 20-composite string expands to 50 logical gates.  A cadence
q picks how many error-correction cycles are inserted across the run;
the seven supported cadences range from "after every logical gate" (50)
down to "never" (0).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import gadgets, steane
from .noise import LocationCounter, NoiseModel
from .states import PureState, UsageError, gate_matrix

DEFAULT_SEQUENCE = "ABBBAAAABBABABABBBAA"

# expansion in application order (rightmost factor of the product first)
COMPOSITES = {"A": ("T", "P", "H"), "B": ("T", "H")}

CADENCES = (50, 20, 10, 4, 2, 1, 0)

# cadence -> composite stride, for the cadences defined per composite
_COMPOSITE_STRIDE = {20: 1, 10: 2, 4: 5, 2: 10}


class ParseError(ValueError):
    """Malformed composite string."""


@dataclass(frozen=True)
class GateSequence:
    """A parsed composite string with its expanded logical-gate list.

    expanded holds gate kinds in application order; boundaries[i] is the
    1-based index of the last gate of the (i+1)-th applied composite.
    """

    composite_string: str
    expanded: tuple[str, ...]
    boundaries: tuple[int, ...]
    left_to_right: bool = False

    @property
    def num_composites(self) -> int:
        return len(self.boundaries)


def parse_sequence(text: str, left_to_right: bool = False) -> GateSequence:
    """Expand a composite string; by default the rightmost composite is
    applied first, reading the string as an operator product."""
    if not text:
        raise ParseError("empty composite string")
    for i, ch in enumerate(text):
        if ch not in COMPOSITES:
            raise ParseError(f"invalid character {ch!r} at position {i}")
    order = text if left_to_right else text[::-1]
    expanded: list[str] = []
    boundaries: list[int] = []
    for ch in order:
        expanded.extend(COMPOSITES[ch])
        boundaries.append(len(expanded))
    return GateSequence(text, tuple(expanded), tuple(boundaries), left_to_right)


@dataclass(frozen=True)
class QecSchedule:
    """Cadence q plus the sorted 1-based gate indices after which a QEC
    cycle runs."""

    q: int
    insertion_points: tuple[int, ...]


def build_schedule(q: int, seq: GateSequence,
                   q10_after_odd: bool = False) -> QecSchedule:
    """Insertion points for cadence q on the given sequence.

    On the default 20-composite string: 50 -> after every logical gate,
    20 -> after every composite, 10 -> after even-numbered composites
    (2, 4, ..., 20; q10_after_odd switches to 1, 3, ...), 4 -> after
    composites 5, 10, 15, 20, 2 -> after composites 10 and 20, 1 -> after
    the final composite, 0 -> never.  Shorter strings keep the same
    strides, so the cardinality scales proportionally.
    """
    if q not in CADENCES:
        raise UsageError(f"unsupported cadence q={q!r}; pick one of {CADENCES}")
    if q == 0:
        points: tuple[int, ...] = ()
    elif q == 50:
        points = tuple(range(1, len(seq.expanded) + 1))
    elif q == 1:
        points = (seq.boundaries[-1],)
    else:
        stride = _COMPOSITE_STRIDE[q]
        offset = stride - 1
        if q == 10 and q10_after_odd:
            offset = 0
        points = tuple(seq.boundaries[offset::stride])
    return QecSchedule(q, points)


@dataclass(frozen=True)
class LogicalInput:
    """One-qubit amplitudes (alpha, beta); renormalized on construction."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        n = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if not np.isfinite(n) or n < 1e-12:
            raise UsageError("logical input amplitudes are degenerate")
        s = 1.0 / np.sqrt(n)
        object.__setattr__(self, "alpha", complex(self.alpha) * s)
        object.__setattr__(self, "beta", complex(self.beta) * s)

    _LABELS = {
        "0": (1.0, 0.0),
        "1": (0.0, 1.0),
        "+": (1.0, 1.0),
        "-": (1.0, -1.0),
        "+i": (1.0, 1.0j),
        "-i": (1.0, -1.0j),
    }

    @classmethod
    def from_label(cls, label: str) -> "LogicalInput":
        try:
            a, b = cls._LABELS[label]
        except KeyError:
            raise UsageError(f"unknown input label {label!r}") from None
        return cls(a, b)

    @classmethod
    def from_angles(cls, alpha: float, beta: float) -> "LogicalInput":
        """cos(alpha)|0> + e^(i*beta) sin(alpha)|1>."""
        return cls(np.cos(alpha), np.exp(1j * beta) * np.sin(alpha))


def ideal_final_state(seq: GateSequence, inp: LogicalInput) -> PureState:
    """Noise-free reference: run the 2x2 chain, then encode the result."""
    psi = np.array([inp.alpha, inp.beta], dtype=np.complex128)
    for kind in seq.expanded:
        psi = gate_matrix(kind) @ psi
    return steane.encode_ideal(psi[0], psi[1])


def structural_locations(seq: GateSequence, schedule: QecSchedule,
                         model: NoiseModel,
                         round_order: str = "alternating") -> LocationCounter:
    """Deterministic noise-location tally of a scheduled run.

    Both engines consume the same circuit builders, so this count applies
    to either; conditional corrections are excluded (they depend on
    measurement records).
    """
    c = LocationCounter()
    points = frozenset(schedule.insertion_points)
    cycle_ops = gadgets.qec_cycle_ops(round_order)
    tele_ops = gadgets.teleport_ops(include_theta=not model.ideal_theta_ancilla)
    for i, kind in enumerate(seq.expanded, start=1):
        if kind == "T":
            gadgets.count_channels(tele_ops, model, c)
        else:
            gadgets.count_channels(steane.transversal_circuit(kind), model, c)
        if i in points:
            gadgets.count_channels(cycle_ops, model, c)
    return c


def run_schedule(seq: GateSequence, schedule: QecSchedule, model: NoiseModel,
                 inp: LogicalInput = LogicalInput(1.0, 0.0),
                 round_order: str = "alternating"):
    """Dense-engine run: perfectly encoded input, noisy logical gates with
    QEC cycles at the scheduled points, fidelity against the ideal chain."""
    from . import harness

    t0 = time.perf_counter()
    counter = LocationCounter()
    points = frozenset(schedule.insertion_points)
    br = gadgets.Branch.from_state(steane.encode_ideal(inp.alpha, inp.beta))
    for i, kind in enumerate(seq.expanded, start=1):
        if kind == "T":
            br = gadgets.t_gate_teleport_branch(br, model, counter=counter)
        else:
            br = gadgets.transversal_branch(br, kind, model, counter=counter)
        if i in points:
            br = gadgets.qec_cycle_branch(br, model, round_order=round_order,
                                          counter=counter)
    ideal = ideal_final_state(seq, inp)
    if br.pure:
        f = float(np.abs(np.vdot(ideal.vec, br.arr)) ** 2) / br.weight
    else:
        f = float(np.real(np.vdot(ideal.vec, br.arr @ ideal.vec))) / br.weight
    f = min(1.0, max(0.0, f))
    return harness.RunResult(
        engine="dense",
        p_x=model.p_x, p_y=model.p_y, p_z=model.p_z,
        q=schedule.q,
        fidelity=f,
        infidelity=1.0 - f,
        stderr=0.0,
        n_traj=0,
        seed=0,
        wall_seconds=time.perf_counter() - t0,
        location_count=counter.total,
        conditional_count=counter.conditional,
    )
