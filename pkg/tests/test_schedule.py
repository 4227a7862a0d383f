"""Composite parsing, cadence schedules, and the dense scheduled run."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steanesim import UsageError, steane
from steanesim.gadgets import Branch, t_gate_teleport_branch, transversal_branch
from steanesim.noise import NoiseModel
from steanesim.schedule import (
    CADENCES,
    DEFAULT_SEQUENCE,
    LogicalInput,
    ParseError,
    build_schedule,
    ideal_final_state,
    parse_sequence,
    run_schedule,
    structural_locations,
)


class TestParseSequence:
    def test_single_composites(self):
        assert parse_sequence("A").expanded == ("T", "P", "H")
        assert parse_sequence("B").expanded == ("T", "H")

    def test_product_reads_right_to_left(self):
        seq = parse_sequence("AB")
        assert seq.expanded == ("T", "H", "T", "P", "H")
        assert seq.boundaries == (2, 5)
        assert seq.num_composites == 2

    def test_left_to_right_mode(self):
        seq = parse_sequence("AB", left_to_right=True)
        assert seq.expanded == ("T", "P", "H", "T", "H")
        assert seq.boundaries == (3, 5)
        assert seq.left_to_right

    def test_default_sequence_shape(self):
        seq = parse_sequence(DEFAULT_SEQUENCE)
        assert seq.num_composites == 20
        assert len(seq.expanded) == 50
        assert seq.boundaries[-1] == 50

    def test_invalid_character_names_position(self):
        with pytest.raises(ParseError, match="position 2"):
            parse_sequence("ABXB")

    def test_empty_rejected(self):
        with pytest.raises(ParseError):
            parse_sequence("")

    @settings(max_examples=40, deadline=None)
    @given(st.text(alphabet="AB", min_size=1, max_size=30))
    def test_expansion_conserves_length(self, text):
        seq = parse_sequence(text)
        n_a = text.count("A")
        n_b = text.count("B")
        assert len(seq.expanded) == 3 * n_a + 2 * n_b
        assert len(seq.boundaries) == n_a + n_b
        assert seq.boundaries[-1] == len(seq.expanded)


class TestBuildSchedule:
    def setup_method(self):
        self.seq = parse_sequence(DEFAULT_SEQUENCE)

    def test_cadence_cardinalities(self):
        expected = {50: 50, 20: 20, 10: 10, 4: 4, 2: 2, 1: 1, 0: 0}
        for q, count in expected.items():
            sched = build_schedule(q, self.seq)
            assert sched.q == q
            assert len(sched.insertion_points) == count

    def test_every_gate_cadence(self):
        sched = build_schedule(50, self.seq)
        assert sched.insertion_points == tuple(range(1, 51))

    def test_composite_cadences_sit_on_boundaries(self):
        b = self.seq.boundaries
        assert build_schedule(20, self.seq).insertion_points == b
        assert build_schedule(10, self.seq).insertion_points == b[1::2]
        assert build_schedule(4, self.seq).insertion_points == (
            b[4], b[9], b[14], b[19])
        assert build_schedule(2, self.seq).insertion_points == (b[9], b[19])
        assert build_schedule(1, self.seq).insertion_points == (50,)
        assert build_schedule(0, self.seq).insertion_points == ()

    def test_sparse_cadence_after_odd_composites(self):
        sched = build_schedule(10, self.seq, q10_after_odd=True)
        assert sched.insertion_points == self.seq.boundaries[0::2]

    def test_short_string_keeps_stride(self):
        seq = parse_sequence("ABAB")
        assert build_schedule(10, seq).insertion_points == seq.boundaries[1::2]
        assert build_schedule(4, seq).insertion_points == ()

    def test_unsupported_cadence(self):
        with pytest.raises(UsageError):
            build_schedule(7, self.seq)
        assert 7 not in CADENCES


class TestLogicalInput:
    def test_labels(self):
        s = 1 / np.sqrt(2)
        cases = {
            "0": (1, 0), "1": (0, 1), "+": (s, s), "-": (s, -s),
            "+i": (s, 1j * s), "-i": (s, -1j * s),
        }
        for label, (a, b) in cases.items():
            inp = LogicalInput.from_label(label)
            assert inp.alpha == pytest.approx(a)
            assert inp.beta == pytest.approx(b)

    def test_unknown_label(self):
        with pytest.raises(UsageError):
            LogicalInput.from_label("T")

    def test_renormalizes(self):
        inp = LogicalInput(3.0, 4.0j)
        assert inp.alpha == pytest.approx(0.6)
        assert inp.beta == pytest.approx(0.8j)

    def test_degenerate_rejected(self):
        with pytest.raises(UsageError):
            LogicalInput(0.0, 0.0)

    def test_from_angles(self):
        inp = LogicalInput.from_angles(np.pi / 3, np.pi / 5)
        assert inp.alpha == pytest.approx(0.5)
        assert inp.beta == pytest.approx(
            np.exp(1j * np.pi / 5) * np.sin(np.pi / 3))


class TestIdealFinalState:
    def test_matches_encoded_gadget_chain(self, rng):
        a = rng.normal(size=2) + 1j * rng.normal(size=2)
        a = a / np.linalg.norm(a)
        inp = LogicalInput(a[0], a[1])
        seq = parse_sequence("AB")
        ideal = ideal_final_state(seq, inp)
        br = Branch.from_state(steane.encode_ideal(inp.alpha, inp.beta))
        model = NoiseModel()
        for kind in seq.expanded:
            if kind == "T":
                br = t_gate_teleport_branch(br, model)
            else:
                br = transversal_branch(br, kind, model)
        overlap = abs(np.vdot(ideal.vec, br.arr)) ** 2 / br.weight
        assert overlap == pytest.approx(1.0, abs=1e-12)

    def test_plus_through_single_b(self):
        # B = H T: |+> -> T|+> -> H T |+>
        inp = LogicalInput.from_label("+")
        out = ideal_final_state(parse_sequence("B"), inp)
        t = np.exp(1j * np.pi / 4)
        h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        amps = h @ np.array([1, t]) / np.sqrt(2)
        np.testing.assert_allclose(
            out.vec, steane.encode_ideal(amps[0], amps[1]).vec, atol=1e-14)


class TestStructuralLocations:
    def setup_method(self):
        self.seq = parse_sequence(DEFAULT_SEQUENCE)

    def test_default_sequence_totals(self):
        model = NoiseModel(1e-4, 1e-4, 1e-4)
        base = structural_locations(self.seq, build_schedule(0, self.seq),
                                    model)
        assert base.total == 1310
        per_cycle = 324
        for q, cycles in ((50, 50), (20, 20), (10, 10), (4, 4), (2, 2), (1, 1)):
            c = structural_locations(self.seq, build_schedule(q, self.seq),
                                     model)
            assert c.total == 1310 + cycles * per_cycle, q

    def test_ideal_resource_block_reduces_count(self):
        model = NoiseModel(1e-4, 1e-4, 1e-4, ideal_theta_ancilla=True)
        c = structural_locations(self.seq, build_schedule(0, self.seq), model)
        assert c.total == 630


class TestRunSchedule:
    def test_noiseless_run_is_transparent(self):
        seq = parse_sequence("AB")
        sched = build_schedule(20, seq)
        for label in ("0", "+i"):
            res = run_schedule(seq, sched, NoiseModel(),
                               inp=LogicalInput.from_label(label))
            assert res.engine == "dense"
            assert res.fidelity == pytest.approx(1.0, abs=1e-9)
            assert res.infidelity == pytest.approx(0.0, abs=1e-9)
            assert res.stderr == 0.0 and res.n_traj == 0
            assert res.q == 20

    def test_noiseless_default_sequence(self):
        seq = parse_sequence(DEFAULT_SEQUENCE)
        sched = build_schedule(4, seq)
        res = run_schedule(seq, sched, NoiseModel(),
                           inp=LogicalInput.from_label("+"))
        assert res.fidelity == pytest.approx(1.0, abs=1e-9)
        assert res.location_count == 1310 + 4 * 324

    def test_location_count_matches_structural(self):
        seq = parse_sequence("AB")
        sched = build_schedule(20, seq)
        model = NoiseModel()
        res = run_schedule(seq, sched, model)
        assert res.location_count == structural_locations(
            seq, sched, model).total
