"""Sweep orchestration, fractional-change bookkeeping, and output formats."""

import json
import math

import numpy as np
import pytest

from steanesim import UsageError, harness
from steanesim.harness import (
    CSV_HEADER,
    EngineComparison,
    LOW_CONFIDENCE_N,
    RunResult,
    SweepSpec,
    UndefinedMetricError,
    compare_engines,
    dominant_spec,
    fractional_change,
    run_point,
    run_sweep,
    single_result,
    sweep_csv,
    sweep_json,
    table_one_spec,
)
from steanesim.noise import NoiseModel
from steanesim.schedule import (CADENCES, LogicalInput, build_schedule,
                                parse_sequence)


def make_row(**overrides):
    base = dict(engine="dense", p_x=1e-4, p_y=1e-4, p_z=1e-4, q=50,
                fidelity=0.9, infidelity=0.1, stderr=0.0, n_traj=0, seed=0,
                wall_seconds=1.0, location_count=100)
    base.update(overrides)
    return RunResult(**base)


class TestFractionalChange:
    def test_equal_infidelities(self):
        assert fractional_change(0.3, 0.3) == 0.0

    def test_perfect_scheme(self):
        assert fractional_change(0.25, 0.0) == 1.0

    def test_sign_convention(self):
        assert fractional_change(0.1, 0.05) > 0
        assert fractional_change(0.1, 0.2) < 0
        assert fractional_change(0.1, 0.2) == pytest.approx(-1.0)

    def test_zero_baseline_undefined(self):
        with pytest.raises(UndefinedMetricError):
            fractional_change(0.0, 0.1)


class TestRunResult:
    def test_valid(self):
        row = make_row()
        assert row.conditional_count == 0
        assert not row.low_confidence

    def test_unknown_engine(self):
        with pytest.raises(UsageError):
            make_row(engine="tensor-network")

    def test_fidelity_range(self):
        with pytest.raises(UsageError):
            make_row(fidelity=1.2, infidelity=-0.2)

    def test_infidelity_consistency(self):
        with pytest.raises(UsageError):
            make_row(fidelity=0.9, infidelity=0.2)


class TestSweepSpec:
    def test_defaults(self):
        spec = SweepSpec()
        assert spec.preset == "depolarizing"
        assert spec.engine == "dense"

    def test_mc_requires_seed(self):
        with pytest.raises(UsageError):
            SweepSpec(engine="mc")
        SweepSpec(engine="mc", base_seed=3)

    def test_mc_requires_trajectories(self):
        with pytest.raises(UsageError):
            SweepSpec(engine="mc", base_seed=3, n_traj=0)

    def test_unknown_preset_and_engine(self):
        with pytest.raises(UsageError):
            SweepSpec(preset="amplitude-damping")
        with pytest.raises(UsageError):
            SweepSpec(engine="exact")

    def test_schemes_validated(self):
        with pytest.raises(UsageError, match="7"):
            SweepSpec(schemes=(50, 7))
        with pytest.raises(UsageError):
            SweepSpec(schemes=())
        with pytest.raises(UsageError):
            SweepSpec(p_grid=())

    def test_jobs_validated(self):
        with pytest.raises(UsageError):
            SweepSpec(jobs=0)

    def test_depolarizing_model(self):
        model = SweepSpec().model_for(3e-4)
        assert model.p_x == pytest.approx(1e-4)
        assert model.p_y == pytest.approx(1e-4)
        assert model.p_z == pytest.approx(1e-4)

    def test_dominant_model_floors_other_axes(self):
        model = SweepSpec(preset="x-dominant").model_for(1e-3)
        assert model.p_x == 1e-3
        assert model.p_y == harness.DOMINANT_FLOOR
        assert model.p_z == harness.DOMINANT_FLOOR
        zmodel = SweepSpec(preset="z-dominant").model_for(1e-3)
        assert zmodel.p_z == 1e-3 and zmodel.p_x == harness.DOMINANT_FLOOR

    def test_custom_model_takes_triples(self):
        spec = SweepSpec(preset="custom", p_grid=((1e-4, 2e-4, 3e-4),))
        model = spec.model_for(spec.p_grid[0])
        assert (model.p_x, model.p_y, model.p_z) == (1e-4, 2e-4, 3e-4)

    def test_flags_threaded_into_model(self):
        spec = SweepSpec(noisy_prep=False, ideal_theta_ancilla=True)
        model = spec.model_for(1e-4)
        assert not model.noisy_prep
        assert model.ideal_theta_ancilla
        assert model.noisy_measure

    def test_schedule_round_trip(self):
        spec = SweepSpec(sequence="ABAB")
        assert spec.parsed_sequence().num_composites == 4
        assert spec.schedule_for(20).insertion_points == \
            spec.parsed_sequence().boundaries


class TestPresetSpecs:
    def test_table_one(self):
        spec = table_one_spec()
        assert spec.p_grid == (1e-6, 1e-5, 1e-4, 1e-3)
        assert spec.schemes == CADENCES
        assert spec.preset == "depolarizing"
        mc = table_one_spec(engine="mc", base_seed=1)
        assert mc.engine == "mc"

    def test_dominant(self):
        spec = dominant_spec("x")
        assert spec.preset == "x-dominant"
        assert spec.schemes == CADENCES
        assert len(spec.p_grid) == 3


class TestSweep:
    def mc_spec(self, **overrides):
        base = dict(sequence="B", engine="mc", n_traj=8, base_seed=21,
                    p_grid=(1e-3, 1e-4), schemes=(50, 0))
        base.update(overrides)
        return SweepSpec(**base)

    def test_mc_point_fields(self):
        spec = self.mc_spec()
        row = run_point(spec, 1e-3, 0)
        assert row.engine == "mc"
        assert row.n_traj == 8 and row.seed == 21
        assert row.low_confidence  # far below the confidence floor
        assert 8 < LOW_CONFIDENCE_N
        assert row.q == 0
        assert 0.0 <= row.fidelity <= 1.0
        assert row.location_count == 55 + 7  # teleport plus transversal H

    def test_rows_sorted_and_baselines_aligned(self):
        res = run_sweep(self.mc_spec())
        ps = [r.p_x * 3 for r in res.rows]
        np.testing.assert_allclose(ps, [1e-4, 1e-4, 1e-3, 1e-3], rtol=1e-12)
        assert [r.q for r in res.rows] == [50, 0, 50, 0]
        for row, d, pr in zip(res.rows, res.d_vs_q50, res.grid_p):
            if row.q == 50 and row.infidelity > 0:
                assert d == 0.0
        np.testing.assert_allclose(res.grid_p, [1e-4, 1e-4, 1e-3, 1e-3],
                                   rtol=1e-12)

    def test_missing_baseline_gives_nan(self):
        res = run_sweep(self.mc_spec(schemes=(20, 0)))
        assert all(math.isnan(d) for d in res.d_vs_q50)
        assert all(math.isnan(dp) for dp in res.d_over_p)

    def test_zero_probability_point_survives(self):
        spec = SweepSpec(sequence="B", p_grid=(0.0,), schemes=(50, 0))
        res = run_sweep(spec)
        assert [r.q for r in res.rows] == [50, 0]
        assert all(r.infidelity == pytest.approx(0.0, abs=1e-9)
                   for r in res.rows)
        # no reference probability to scale by
        assert all(math.isnan(dp) for dp in res.d_over_p)

    def test_zero_infidelity_baseline_gives_nan(self, monkeypatch):
        def fake_point(spec, p, q, jobs=1):
            infid = 0.0 if q == 50 else 0.25
            return make_row(p_x=p, p_y=p, p_z=p, q=q,
                            fidelity=1.0 - infid, infidelity=infid)

        monkeypatch.setattr(harness, "run_point", fake_point)
        res = run_sweep(SweepSpec(p_grid=(3e-4,), schemes=(50, 0)))
        assert res.rows[1].infidelity == 0.25
        assert all(math.isnan(d) for d in res.d_vs_q50)
        assert all(math.isnan(dp) for dp in res.d_over_p)

    def test_d_over_p_scales_d(self):
        res = run_sweep(self.mc_spec(n_traj=64))
        for d, dp, pr in zip(res.d_vs_q50, res.d_over_p, res.grid_p):
            if not math.isnan(d):
                assert dp == pytest.approx(d / pr)

    def test_custom_triple_reference_probability(self):
        spec = self.mc_spec(preset="custom", p_grid=((2e-4, 5e-4, 1e-4),))
        res = run_sweep(spec)
        assert res.grid_p == [5e-4, 5e-4]
        assert res.rows[0].p_y == 5e-4


class TestCompareEngines:
    def test_noiseless_engines_agree_exactly(self):
        seq = parse_sequence("B")
        cmp = compare_engines(seq, build_schedule(0, seq), NoiseModel(),
                              LogicalInput.from_label("+"), 4, 5)
        assert isinstance(cmp, EngineComparison)
        assert cmp.stderr == 0.0
        assert cmp.z_score == 0.0
        assert cmp.passed

    def test_degenerate_estimate_fails_loudly(self):
        # one trajectory gives stderr 0; any daylight from the dense value
        # must read as an infinite z, not a silent pass
        seq = parse_sequence("B")
        cmp = compare_engines(seq, build_schedule(0, seq),
                              NoiseModel(0.02, 0.02, 0.01),
                              LogicalInput.from_label("+"), 1, 5)
        assert cmp.stderr == 0.0
        assert math.isinf(cmp.z_score)
        assert not cmp.passed


class TestOutput:
    def small_sweep(self):
        spec = SweepSpec(sequence="B", engine="mc", n_traj=8, base_seed=21,
                         p_grid=(1e-3,), schemes=(50, 0))
        return run_sweep(spec)

    def test_csv_schema(self):
        res = self.small_sweep()
        text = sweep_csv(res)
        lines = text.strip().split("\n")
        assert lines[0] == CSV_HEADER
        assert len(lines) == 3
        fields = lines[1].split(",")
        assert len(fields) == len(CSV_HEADER.split(","))
        assert fields[0] == "mc"
        assert int(fields[10]) == 8
        # 17 significant digits survive a float round trip
        assert float(fields[5]) == res.rows[0].fidelity

    def test_csv_rerun_is_byte_identical(self):
        a = sweep_csv(self.small_sweep(), zero_wall=True)
        b = sweep_csv(self.small_sweep(), zero_wall=True)
        assert a == b

    def test_zero_wall_blanks_timing_only(self):
        res = self.small_sweep()
        rows = sweep_csv(res, zero_wall=True).strip().split("\n")[1:]
        for line in rows:
            assert line.split(",")[12] == "0"

    def test_json_mirrors_csv_with_extras(self):
        res = self.small_sweep()
        data = json.loads(sweep_json(res, zero_wall=True))
        assert len(data) == 2
        first = data[0]
        assert first["engine"] == "mc"
        assert first["q"] == 50
        assert first["wall_seconds"] == 0.0
        assert first["low_confidence"] is True
        assert first["grid_p"] == 1e-3
        assert "conditional_count" in first

    def test_json_uses_null_for_undefined_d(self):
        spec = SweepSpec(sequence="B", engine="mc", n_traj=8, base_seed=21,
                         p_grid=(1e-3,), schemes=(20,))
        data = json.loads(sweep_json(run_sweep(spec)))
        assert data[0]["D_vs_q50"] is None
        assert data[0]["D_over_p"] is None

    def test_single_result_rules(self):
        noisy = single_result(make_row())
        assert noisy.d_vs_q50 == [0.0]
        assert noisy.d_over_p == [0.0]
        clean = single_result(make_row(fidelity=1.0, infidelity=0.0))
        assert math.isnan(clean.d_vs_q50[0])
        off_baseline = single_result(make_row(q=20))
        assert math.isnan(off_baseline.d_vs_q50[0])
