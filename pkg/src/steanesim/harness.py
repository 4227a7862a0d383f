"""Experiment orchestration: run records, parameter sweeps, the fractional
infidelity-change metric, Monte-Carlo estimation, and CSV/JSON output."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import schedule as sched_mod
from . import trajectory
from .noise import NoiseModel
from .schedule import (CADENCES, DEFAULT_SEQUENCE, GateSequence, LogicalInput,
                       QecSchedule, build_schedule, parse_sequence,
                       structural_locations)
from .states import UsageError

CSV_HEADER = ("engine,p_x,p_y,p_z,q,fidelity,infidelity,D_vs_q50,D_over_p,"
              "stderr,n_traj,seed,wall_seconds,location_count")

PRESETS = ("depolarizing", "x-dominant", "y-dominant", "z-dominant", "custom")

ENGINES = ("dense", "mc")

DOMINANT_FLOOR = 1e-10

LOW_CONFIDENCE_N = 100


class UndefinedMetricError(ValueError):
    """D is undefined when the baseline infidelity is zero."""


@dataclass
class RunResult:
    """One simulated point.  stderr and n_traj are meaningful for the mc
    engine only (0 for dense); dense runs record seed 0."""

    engine: str
    p_x: float
    p_y: float
    p_z: float
    q: int
    fidelity: float
    infidelity: float
    stderr: float
    n_traj: int
    seed: int
    wall_seconds: float
    location_count: int
    conditional_count: int = 0
    low_confidence: bool = False

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise UsageError(f"unknown engine {self.engine!r}")
        if not 0.0 <= self.fidelity <= 1.0:
            raise UsageError(f"fidelity {self.fidelity} outside [0, 1]")
        if abs(self.infidelity - (1.0 - self.fidelity)) > 1e-12:
            raise UsageError("infidelity must equal 1 - fidelity")


def fractional_change(i50: float, iq: float) -> float:
    """D = (I_50 - I_q)/I_50; positive means less QEC gave higher fidelity."""
    if i50 == 0.0:
        raise UndefinedMetricError(
            "fractional change is undefined at zero baseline infidelity")
    return (i50 - iq) / i50


@dataclass(frozen=True)
class SweepSpec:
    """A sweep over (error probability, cadence) points.

    The defaults are the small acceptance grid; table_one_spec() gives the
    full 28-cell grid.  For the custom preset, p_grid entries are
    (p_x, p_y, p_z) triples; otherwise each entry is the dominant (or
    common) probability and the preset fills the rest.
    """

    preset: str = "depolarizing"
    p_grid: tuple = (1e-6, 1e-5, 1e-4)
    schemes: tuple = (50, 20, 1, 0)
    sequence: str = DEFAULT_SEQUENCE
    input: LogicalInput = LogicalInput(1.0, 0.0)
    engine: str = "dense"
    n_traj: int = 10000
    base_seed: int | None = None
    left_to_right: bool = False
    round_order: str = "alternating"
    q10_after_odd: bool = False
    noisy_prep: bool = True
    noisy_measure: bool = True
    noisy_recovery: bool = True
    ideal_theta_ancilla: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise UsageError(f"unknown preset {self.preset!r}")
        if self.engine not in ENGINES:
            raise UsageError(f"unknown engine {self.engine!r}")
        bad = [q for q in self.schemes if q not in CADENCES]
        if bad:
            raise UsageError(f"unsupported schemes {bad}; pick from {CADENCES}")
        if not self.schemes or not self.p_grid:
            raise UsageError("schemes and p_grid must be nonempty")
        if self.engine == "mc" and self.base_seed is None:
            raise UsageError("the mc engine requires a base seed")
        if self.engine == "mc" and self.n_traj < 1:
            raise UsageError("n_traj must be at least 1")
        if self.jobs < 1:
            raise UsageError("jobs must be at least 1")

    def flags(self) -> dict:
        return dict(noisy_prep=self.noisy_prep,
                    noisy_measure=self.noisy_measure,
                    noisy_recovery=self.noisy_recovery,
                    ideal_theta_ancilla=self.ideal_theta_ancilla)

    def model_for(self, p) -> NoiseModel:
        if self.preset == "depolarizing":
            return NoiseModel.depolarizing(float(p), **self.flags())
        if self.preset == "custom":
            px, py, pz = p
            return NoiseModel(float(px), float(py), float(pz), **self.flags())
        axis = self.preset[0]
        return NoiseModel.dominant(axis, float(p), floor=DOMINANT_FLOOR,
                                   **self.flags())

    def parsed_sequence(self) -> GateSequence:
        return parse_sequence(self.sequence, self.left_to_right)

    def schedule_for(self, q: int) -> QecSchedule:
        return build_schedule(q, self.parsed_sequence(), self.q10_after_odd)


def table_one_spec(**overrides) -> SweepSpec:
    """Full-table long run: 4 depolarizing strengths x all 7 cadences."""
    base = dict(preset="depolarizing",
                p_grid=(1e-6, 1e-5, 1e-4, 1e-3),
                schemes=CADENCES)
    base.update(overrides)
    return SweepSpec(**base)


def dominant_spec(axis: str, **overrides) -> SweepSpec:
    """Single-axis-dominant sweep with the other two rates floored."""
    base = dict(preset=f"{axis}-dominant",
                p_grid=(1e-5, 1e-4, 1e-3),
                schemes=CADENCES)
    base.update(overrides)
    return SweepSpec(**base)


def run_point(spec: SweepSpec, p, q: int, jobs: int = 1) -> RunResult:
    """One (probability, cadence) cell under the spec's engine."""
    seq = spec.parsed_sequence()
    schedule = build_schedule(q, seq, spec.q10_after_odd)
    model = spec.model_for(p)
    if spec.engine == "dense":
        return sched_mod.run_schedule(seq, schedule, model, spec.input,
                                      spec.round_order)
    t0 = time.perf_counter()
    f_hat, stderr = trajectory.run_trajectories(
        seq, schedule, model, spec.input, spec.n_traj, spec.base_seed,
        spec.round_order, jobs=jobs)
    wall = time.perf_counter() - t0
    count = structural_locations(seq, schedule, model, spec.round_order)
    return RunResult(
        engine="mc",
        p_x=model.p_x, p_y=model.p_y, p_z=model.p_z,
        q=q,
        fidelity=f_hat,
        infidelity=1.0 - f_hat,
        stderr=stderr,
        n_traj=spec.n_traj,
        seed=int(spec.base_seed),
        wall_seconds=wall,
        location_count=count.total,
        low_confidence=spec.n_traj < LOW_CONFIDENCE_N,
    )


def _point_job(args):
    spec, p, q = args
    return run_point(spec, p, q)


@dataclass
class SweepResult:
    """Rows sorted by (p_x, p_y, p_z, -q) plus aligned D columns.

    d_vs_q50[i] is Eq-style fractional change of rows[i] against the q=50
    row at the same probability point (NaN when that baseline is missing
    or has zero infidelity); d_over_p[i] divides by the grid probability.
    """

    rows: list = field(default_factory=list)
    d_vs_q50: list = field(default_factory=list)
    d_over_p: list = field(default_factory=list)
    grid_p: list = field(default_factory=list)


def _row_sort_key(item):
    r = item[1]
    return (r.p_x, r.p_y, r.p_z, -r.q)


def run_sweep(spec: SweepSpec) -> SweepResult:
    """All (p, scheme) cells, optionally in parallel; aggregation is by
    sorted key so the worker count never changes the output."""
    points = [(p, q) for p in spec.p_grid for q in spec.schemes]
    if spec.jobs > 1 and len(points) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_point_job,
                                    [(spec, p, q) for p, q in points]))
    else:
        results = [run_point(spec, p, q) for p, q in points]

    def p_ref(p) -> float:
        return float(max(p)) if spec.preset == "custom" else float(p)

    tagged = sorted(zip([p_ref(p) for p, _ in points], results),
                    key=_row_sort_key)
    out = SweepResult()
    baselines: dict[float, float] = {}
    for pr, row in tagged:
        if row.q == 50:
            baselines[pr] = row.infidelity
    for pr, row in tagged:
        i50 = baselines.get(pr)
        if i50 is None or i50 == 0.0:
            d = math.nan
        else:
            d = fractional_change(i50, row.infidelity)
        out.rows.append(row)
        out.grid_p.append(pr)
        out.d_vs_q50.append(d)
        # same convention as single_result: undefined at a zero reference
        out.d_over_p.append(d / pr if pr > 0.0 and not math.isnan(d)
                            else math.nan)
    return out


def mc_estimate(seq: GateSequence, schedule: QecSchedule, model: NoiseModel,
                inp: LogicalInput, n_traj: int, base_seed: int,
                round_order: str = "alternating",
                jobs: int = 1) -> tuple[float, float]:
    """(F_hat, stderr) over n_traj counter-seeded trajectories."""
    return trajectory.run_trajectories(seq, schedule, model, inp, n_traj,
                                       base_seed, round_order, jobs)


@dataclass
class EngineComparison:
    f_dense: float
    f_mc: float
    stderr: float
    z_score: float
    passed: bool


def compare_engines(seq: GateSequence, schedule: QecSchedule,
                    model: NoiseModel, inp: LogicalInput, n_traj: int,
                    base_seed: int, round_order: str = "alternating",
                    jobs: int = 1) -> EngineComparison:
    """Dense vs Monte-Carlo at one point; pass when |dF| <= 3 stderr."""
    dense = sched_mod.run_schedule(seq, schedule, model, inp, round_order)
    f_mc, stderr = mc_estimate(seq, schedule, model, inp, n_traj, base_seed,
                               round_order, jobs)
    delta = abs(dense.fidelity - f_mc)
    if stderr > 0.0:
        z = delta / stderr
    else:
        z = 0.0 if delta <= 1e-12 else math.inf
    return EngineComparison(dense.fidelity, f_mc, stderr, z, z <= 3.0)


# --------------------------------------------------------------------------
# output


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def sweep_csv(result: SweepResult, zero_wall: bool = False) -> str:
    """Schema-stable CSV; zero_wall blanks the timing column so reruns
    with the same seed are byte-identical."""
    lines = [CSV_HEADER]
    for row, d, dp in zip(result.rows, result.d_vs_q50, result.d_over_p):
        wall = 0.0 if zero_wall else row.wall_seconds
        lines.append(",".join([
            row.engine,
            _fmt(row.p_x), _fmt(row.p_y), _fmt(row.p_z),
            str(row.q),
            _fmt(row.fidelity), _fmt(row.infidelity),
            _fmt(d), _fmt(dp),
            _fmt(row.stderr),
            str(row.n_traj),
            str(row.seed),
            _fmt(wall),
            str(row.location_count),
        ]))
    return "\n".join(lines) + "\n"


def sweep_json(result: SweepResult, zero_wall: bool = False) -> str:
    """JSON array equivalent of the CSV, with the diagnostic extras."""
    out = []
    for row, d, dp, pr in zip(result.rows, result.d_vs_q50, result.d_over_p,
                              result.grid_p):
        out.append({
            "engine": row.engine,
            "p_x": row.p_x, "p_y": row.p_y, "p_z": row.p_z,
            "q": row.q,
            "fidelity": row.fidelity,
            "infidelity": row.infidelity,
            "D_vs_q50": None if math.isnan(d) else d,
            "D_over_p": None if math.isnan(dp) else dp,
            "stderr": row.stderr,
            "n_traj": row.n_traj,
            "seed": row.seed,
            "wall_seconds": 0.0 if zero_wall else row.wall_seconds,
            "location_count": row.location_count,
            "conditional_count": row.conditional_count,
            "low_confidence": row.low_confidence,
            "grid_p": pr,
        })
    return json.dumps(out, indent=2) + "\n"


def single_result(row: RunResult) -> SweepResult:
    """Wrap one RunResult as a one-row sweep (D undefined without q=50)."""
    res = SweepResult()
    res.rows = [row]
    pr = max(row.p_x, row.p_y, row.p_z)
    res.grid_p = [pr]
    if row.q == 50:
        d = 0.0 if row.infidelity > 0.0 else math.nan
    else:
        d = math.nan
    res.d_vs_q50 = [d]
    res.d_over_p = [d / pr if pr > 0 and not math.isnan(d) else math.nan]
    return res
