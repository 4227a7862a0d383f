"""Dense and Monte-Carlo simulation of encoded single-qubit gate sequences
on the seven-qubit CSS code under biased Pauli noise."""

from .harness import (
    CSV_HEADER,
    EngineComparison,
    RunResult,
    SweepResult,
    SweepSpec,
    UndefinedMetricError,
    compare_engines,
    fractional_change,
    mc_estimate,
    run_point,
    run_sweep,
    sweep_csv,
    sweep_json,
)
from .noise import LocationCounter, NoiseModel
from .schedule import (
    CADENCES,
    DEFAULT_SEQUENCE,
    GateSequence,
    LogicalInput,
    ParseError,
    QecSchedule,
    build_schedule,
    ideal_final_state,
    parse_sequence,
    run_schedule,
    structural_locations,
)
from .states import (
    CapacityError,
    DensityMatrix,
    GateOp,
    PureState,
    UsageError,
    apply_circuit,
    apply_gate,
    fidelity,
    measure_z,
    partial_trace,
    tensor,
)
from .trajectory import run_trajectories, run_trajectory

__all__ = [
    "CADENCES",
    "CSV_HEADER",
    "CapacityError",
    "DEFAULT_SEQUENCE",
    "DensityMatrix",
    "EngineComparison",
    "GateOp",
    "GateSequence",
    "LocationCounter",
    "LogicalInput",
    "NoiseModel",
    "ParseError",
    "PureState",
    "QecSchedule",
    "RunResult",
    "SweepResult",
    "SweepSpec",
    "UndefinedMetricError",
    "UsageError",
    "apply_circuit",
    "apply_gate",
    "build_schedule",
    "compare_engines",
    "fidelity",
    "fractional_change",
    "ideal_final_state",
    "mc_estimate",
    "measure_z",
    "parse_sequence",
    "partial_trace",
    "run_point",
    "run_schedule",
    "run_sweep",
    "run_trajectories",
    "run_trajectory",
    "structural_locations",
    "sweep_csv",
    "sweep_json",
    "tensor",
]

__version__ = "0.1.0"
