"""Command-line front end.

Three subcommands: ``run`` simulates a single (probability, cadence) point,
``sweep`` runs a grid and emits the fractional-change columns, ``validate``
runs the built-in invariant suite.  Configuration is a JSON document given
with --config plus flag overrides; flags win.  Exit codes: 0 success,
1 validate-check failure, 2 configuration error, 3 capacity error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import gadgets, harness, kernels, steane
from .harness import ENGINES, PRESETS, SweepSpec
from .noise import NoiseModel
from .schedule import (CADENCES, DEFAULT_SEQUENCE, LogicalInput, ParseError,
                       build_schedule, parse_sequence)
from .states import CapacityError, UsageError

PRESET_ALIASES = {"x": "x-dominant", "y": "y-dominant", "z": "z-dominant"}

ROUND_ORDERS = ("alternating", "pairs")

VALIDATE_SEED = 7

# The JSON config mirrors the flag set; every key is overridable by the
# matching flag.  Values give the expected JSON type for the error message.
CONFIG_FIELDS = {
    "engine": "string",
    "preset": "string",
    "p": "number or list",
    "q": "integer or list",
    "sequence": "string",
    "input": "string",
    "ntraj": "integer",
    "seed": "integer",
    "jobs": "integer",
    "left_to_right": "boolean",
    "round_order": "string",
    "q10_after_odd": "boolean",
    "noisy_prep": "boolean",
    "noisy_measure": "boolean",
    "noisy_recovery": "boolean",
    "ideal_theta_ancilla": "boolean",
    "precision": "string",
    "zero_wall": "boolean",
    "out": "string",
    "json_out": "string",
}


def _fail(field: str, detail: str):
    raise UsageError(f"{field}: {detail}")


def _parse_p(value, field: str = "p") -> tuple:
    """Probability list: floats, or px:py:pz triples for the custom preset.

    Accepts a comma-separated string (flag form), a bare number, or a JSON
    list whose entries are numbers or 3-lists.
    """
    if isinstance(value, str):
        toks = [t.strip() for t in value.split(",") if t.strip()]
        items = []
        for tok in toks:
            parts = tok.split(":")
            try:
                if len(parts) == 1:
                    items.append(float(parts[0]))
                elif len(parts) == 3:
                    items.append(tuple(float(x) for x in parts))
                else:
                    _fail(field, f"expected a float or px:py:pz triple, got {tok!r}")
            except ValueError:
                _fail(field, f"not a number: {tok!r}")
        value = items
    elif isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [float(value)]
    if not isinstance(value, (list, tuple)) or not value:
        _fail(field, "expected a nonempty list of probabilities")
    out = []
    for item in value:
        if isinstance(item, (list, tuple)):
            if len(item) != 3:
                _fail(field, f"a rate triple needs three entries, got {item!r}")
            out.append(tuple(float(x) for x in item))
        elif isinstance(item, (int, float)) and not isinstance(item, bool):
            out.append(float(item))
        else:
            _fail(field, f"bad entry {item!r}")
    return tuple(out)


def _parse_q(value, field: str = "q") -> tuple:
    if isinstance(value, str):
        toks = [t.strip() for t in value.split(",") if t.strip()]
        try:
            value = [int(t) for t in toks]
        except ValueError:
            _fail(field, f"not an integer list: {value!r}")
    elif isinstance(value, int) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, (list, tuple)) or not value:
        _fail(field, "expected a nonempty list of cadences")
    out = []
    for item in value:
        if isinstance(item, bool) or not isinstance(item, int):
            _fail(field, f"bad entry {item!r}")
        if item not in CADENCES:
            _fail(field, f"{item} is not a supported cadence; pick from {CADENCES}")
        out.append(item)
    return tuple(out)


def _normalize_preset(name, field: str = "preset") -> str:
    if not isinstance(name, str):
        _fail(field, f"expected a string, got {name!r}")
    name = PRESET_ALIASES.get(name, name)
    if name not in PRESETS:
        choices = sorted(set(PRESETS) | set(PRESET_ALIASES))
        _fail(field, f"unknown preset {name!r}; pick from {choices}")
    return name


def _load_config(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"config: cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config: {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError("config: top level must be a JSON object")
    for key in raw:
        if key not in CONFIG_FIELDS:
            raise UsageError(f"config: unknown field {key!r}")
    return raw


_TYPE_CHECKS = {
    "string": lambda v: isinstance(v, str),
    "integer": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "boolean": lambda v: isinstance(v, bool),
}


def _merge(args, mode: str) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = {
        "engine": "dense",
        "preset": "depolarizing",
        "p": (1e-6, 1e-5, 1e-4) if mode == "sweep" else (1e-4,),
        "q": (50, 20, 1, 0) if mode == "sweep" else (50,),
        "sequence": DEFAULT_SEQUENCE,
        "input": "0",
        "ntraj": 10000,
        "seed": None,
        "jobs": os.cpu_count() or 1,
        "left_to_right": False,
        "round_order": "alternating",
        "q10_after_odd": False,
        "noisy_prep": True,
        "noisy_measure": True,
        "noisy_recovery": True,
        "ideal_theta_ancilla": False,
        "precision": "double",
        "zero_wall": False,
        "out": None,
        "json_out": None,
    }
    if args.config:
        cfg.update(_load_config(args.config))
    for key in CONFIG_FIELDS:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag

    cfg["p"] = _parse_p(cfg["p"])
    cfg["q"] = _parse_q(cfg["q"])
    cfg["preset"] = _normalize_preset(cfg["preset"])
    for key, kind in CONFIG_FIELDS.items():
        check = _TYPE_CHECKS.get(kind)
        if check and cfg[key] is not None and not check(cfg[key]):
            _fail(key, f"expected a {kind}, got {cfg[key]!r}")
    if cfg["engine"] not in ENGINES:
        _fail("engine", f"pick from {ENGINES}")
    if cfg["round_order"] not in ROUND_ORDERS:
        _fail("round_order", f"pick from {ROUND_ORDERS}")
    if cfg["precision"] != "double":
        _fail("precision", "only the double-precision build exists")
    if cfg["engine"] == "mc" and cfg["seed"] is None:
        _fail("seed", "the mc engine requires an explicit seed")

    triples = [p for p in cfg["p"] if isinstance(p, tuple)]
    if cfg["preset"] == "custom" and len(triples) != len(cfg["p"]):
        _fail("p", "the custom preset takes px:py:pz triples")
    if cfg["preset"] != "custom" and triples:
        _fail("p", f"rate triples need preset=custom, not {cfg['preset']!r}")
    return cfg


def _build_spec(cfg: dict) -> SweepSpec:
    return SweepSpec(
        preset=cfg["preset"],
        p_grid=cfg["p"],
        schemes=cfg["q"],
        sequence=cfg["sequence"],
        input=LogicalInput.from_label(cfg["input"]),
        engine=cfg["engine"],
        n_traj=cfg["ntraj"],
        base_seed=cfg["seed"],
        left_to_right=cfg["left_to_right"],
        round_order=cfg["round_order"],
        q10_after_odd=cfg["q10_after_odd"],
        noisy_prep=cfg["noisy_prep"],
        noisy_measure=cfg["noisy_measure"],
        noisy_recovery=cfg["noisy_recovery"],
        ideal_theta_ancilla=cfg["ideal_theta_ancilla"],
        jobs=cfg["jobs"],
    )


def _emit(result, cfg: dict) -> None:
    """CSV to --out or stdout; JSON next to the CSV or to --json-out."""
    csv_text = harness.sweep_csv(result, cfg["zero_wall"])
    json_text = harness.sweep_json(result, cfg["zero_wall"])
    if cfg["out"]:
        Path(cfg["out"]).write_text(csv_text)
        json_path = cfg["json_out"] or str(Path(cfg["out"]).with_suffix(".json"))
        Path(json_path).write_text(json_text)
    else:
        sys.stdout.write(csv_text)
        if cfg["json_out"]:
            Path(cfg["json_out"]).write_text(json_text)


def cmd_run(cfg: dict) -> int:
    if len(cfg["p"]) != 1:
        _fail("p", f"run takes one probability point, got {len(cfg['p'])}")
    if len(cfg["q"]) != 1:
        _fail("q", f"run takes one cadence, got {len(cfg['q'])}")
    spec = _build_spec(cfg)
    row = harness.run_point(spec, cfg["p"][0], cfg["q"][0], jobs=cfg["jobs"])
    _emit(harness.single_result(row), cfg)
    return 0


def cmd_sweep(cfg: dict) -> int:
    spec = _build_spec(cfg)
    _emit(harness.run_sweep(spec), cfg)
    return 0


# --------------------------------------------------------------------------
# validate

_INJECT_STATES = ((1.0, 0.0), (0.0, 1.0), (1.0, 1.0))


def _branch_fidelity(br, ref_vec: np.ndarray) -> float:
    if br.pure:
        return float(abs(np.vdot(ref_vec, br.arr)) ** 2 / br.weight)
    val = float(np.real(np.vdot(ref_vec, br.arr @ ref_vec)))
    return val / br.weight


def check_correctability() -> float:
    """Worst infidelity over 21 single Pauli errors x 3 encoded states after
    one noiseless correction cycle."""
    quiet = NoiseModel(0.0, 0.0, 0.0)
    worst = 0.0
    for alpha, beta in _INJECT_STATES:
        s = 1.0 / np.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
        enc = steane.encode_ideal(alpha * s, beta * s)
        for qubit in range(steane.NUM_DATA):
            for pauli in "XYZ":
                br = gadgets.Branch.from_state(enc)
                kernels.vec_apply_pauli(br.arr, br.num_qubits, qubit, pauli)
                out = gadgets.qec_cycle_branch(br, quiet)
                worst = max(worst, 1.0 - _branch_fidelity(out, enc.vec))
    return worst


def check_transparency(sequence: str) -> float:
    """Worst dense-engine infidelity over all cadences with no noise."""
    spec = SweepSpec(sequence=sequence, schemes=CADENCES,
                     p_grid=((0.0, 0.0, 0.0),), preset="custom")
    worst = 0.0
    for q in CADENCES:
        row = harness.run_point(spec, (0.0, 0.0, 0.0), q)
        worst = max(worst, row.infidelity)
    return worst


def check_engines(ntraj: int, seed: int, jobs: int) -> harness.EngineComparison:
    """Dense vs Monte-Carlo on the short two-composite sequence."""
    seq = parse_sequence("AB")
    schedule = build_schedule(20, seq)
    model = NoiseModel.depolarizing(1e-2)
    return harness.compare_engines(seq, schedule, model, LogicalInput(1.0, 0.0),
                                   ntraj, seed, jobs=jobs)


def _shifted_decoder(orig):
    def decode(bits):
        pos = orig(bits)
        return None if pos is None else (pos + 1) % steane.NUM_DATA
    return decode


def cmd_validate(cfg: dict, quick: bool, inject_fault: bool) -> int:
    orig = steane.decode_syndrome
    if inject_fault:
        steane.decode_syndrome = _shifted_decoder(orig)
    try:
        checks = []
        worst = check_correctability()
        checks.append(("single-error correctability", worst <= 1e-9,
                       f"worst infidelity {worst:.3g}"))
        worst = check_transparency(cfg["sequence"])
        checks.append(("noiseless transparency", worst <= 1e-9,
                       f"worst infidelity {worst:.3g}"))
        if not quick:
            seed = cfg["seed"] if cfg["seed"] is not None else VALIDATE_SEED
            comp = check_engines(cfg["ntraj"], seed, cfg["jobs"])
            checks.append(("mc vs dense on AB", comp.passed,
                           f"dense {comp.f_dense:.6f} mc {comp.f_mc:.6f} "
                           f"z {comp.z_score:.2f}"))
    finally:
        steane.decode_syndrome = orig
    ok = True
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        ok = ok and passed
    return 0 if ok else 1


# --------------------------------------------------------------------------
# argument plumbing

def _add_shared(sub) -> None:
    B = argparse.BooleanOptionalAction
    sub.add_argument("--config", help="JSON config file; flags override it")
    sub.add_argument("--out", help="CSV output path (default: stdout)")
    sub.add_argument("--json-out", dest="json_out",
                     help="JSON output path (default: CSV path with .json)")
    sub.add_argument("--engine", choices=ENGINES)
    sub.add_argument("--seed", type=int, help="base seed; required for mc")
    sub.add_argument("--jobs", type=int,
                     help="worker processes (default: all cores); never "
                          "changes emitted values")
    sub.add_argument("--preset",
                     choices=sorted(set(PRESETS) | set(PRESET_ALIASES)))
    sub.add_argument("--p", help="comma-separated probabilities; "
                                 "px:py:pz triples with --preset custom")
    sub.add_argument("--q", help="comma-separated cadences from "
                                 f"{CADENCES}")
    sub.add_argument("--ntraj", type=int, help="mc trajectories per point")
    sub.add_argument("--sequence", help="composite string, default "
                                        f"{DEFAULT_SEQUENCE}")
    sub.add_argument("--input", help="logical input label: 0 1 + - +i -i")
    sub.add_argument("--round-order", dest="round_order",
                     choices=ROUND_ORDERS)
    sub.add_argument("--left-to-right", dest="left_to_right", action=B)
    sub.add_argument("--q10-after-odd", dest="q10_after_odd", action=B)
    sub.add_argument("--noisy-prep", dest="noisy_prep", action=B)
    sub.add_argument("--noisy-measure", dest="noisy_measure", action=B)
    sub.add_argument("--noisy-recovery", dest="noisy_recovery", action=B)
    sub.add_argument("--ideal-theta-ancilla", dest="ideal_theta_ancilla",
                     action=B)
    sub.add_argument("--zero-wall", dest="zero_wall", action=B,
                     help="zero the wall_seconds column so reruns are "
                          "byte-identical")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="steanesim",
        description="Encoded-qubit gate sequences on the seven-qubit code "
                    "under biased Pauli noise.")
    subs = ap.add_subparsers(dest="cmd", required=True)
    for name, desc in (("run", "simulate one (p, q) point"),
                       ("sweep", "simulate a (p, q) grid"),
                       ("validate", "run the built-in invariant suite")):
        sub = subs.add_parser(name, description=desc)
        _add_shared(sub)
        if name == "validate":
            sub.add_argument("--quick", action="store_true",
                             help="skip the Monte-Carlo engine comparison")
            sub.add_argument("--inject-decoder-fault", action="store_true",
                             help=argparse.SUPPRESS)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _merge(args, args.cmd)
        if args.cmd == "run":
            return cmd_run(cfg)
        if args.cmd == "sweep":
            return cmd_sweep(cfg)
        return cmd_validate(cfg, args.quick, args.inject_decoder_fault)
    except (UsageError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
