"""Command-line entry point for reproducible batch compilation runs.

Subcommands: gen-qaoa, build-library, precompute, tune, compile,
verify, report.  All take an optional flat key=value config file (see
``DEFAULT_CONFIG`` for the documented keys) and are deterministic for a
fixed --seed, except for recorded wall-clock fields.  Errors exit with
status 1 and a single ``error: ...`` line on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import bench, qasm_io
from .circuit import Circuit, build_unitary, MAX_DENSE_WIDTH
from .grape import GrapeConfig, fidelity, propagate, pulse_from_dict
from .hamiltonian import HamiltonianSpec, build_controls, control_labels, default_edges
from .mintime import MinTimeConfig
from .partition import partition_flexible, partition_strict
from .pipeline import (
    CompileError,
    GatePulseLibrary,
    PulseCache,
    TunedHyperparams,
    build_analytic_library,
    build_gate_library,
    compile_flexible,
    compile_gate_based,
    compile_grape,
    compile_strict,
    library_fingerprint,
    precompute_strict,
    schedule_to_json,
    tune_plan,
    verify_schedule,
)

#: Documented configuration keys and their defaults.
DEFAULT_CONFIG = {
    "charge_bound_ghz": 0.1,
    "flux_bound_ghz": 1.5,
    "coupling_bound_ghz": 0.05,
    "topology": "grid",  # or "explicit" with edges = 0-1, 1-2, ...
    "edges": "",
    "dt_ns": 0.05,
    "target_fidelity": 0.999,
    "max_iterations": 1000,
    "learning_rate": 0.01,
    "decay_rate": 0.9999,
    "amplitude_penalty": 1e-4,
    "sample_rate_divisor": 1,
    "mintime_precision_ns": 0.3,
    "doubling_cap": 4.0,
    "learning_rates": "",  # tuning grid override, comma separated
    "decay_rates": "",
    "tune_samples": 3,
}

_GHZ = 2.0 * np.pi


class CliError(RuntimeError):
    pass


def load_config(path: str | None) -> dict:
    """Flat ``key = value`` file with # comments; unknown keys are errors."""
    config = dict(DEFAULT_CONFIG)
    if path is None:
        return config
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in DEFAULT_CONFIG:
            raise CliError(f"{path}:{lineno}: unknown config key {key!r}")
        default = DEFAULT_CONFIG[key]
        try:
            if isinstance(default, float):
                config[key] = float(value)
            elif isinstance(default, int):
                config[key] = int(value)
            else:
                config[key] = value
        except ValueError as exc:
            raise CliError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return config


def spec_for(n_qubits: int, config: dict) -> HamiltonianSpec:
    if config["topology"] == "grid":
        edges = default_edges(n_qubits)
    elif config["topology"] == "explicit":
        edges = []
        text = config["edges"].replace(",", " ")
        for token in text.split():
            a, _, b = token.partition("-")
            edges.append((int(a), int(b)))
        edges = tuple(edges)
    else:
        raise CliError(f"unknown topology {config['topology']!r}")
    return HamiltonianSpec(
        n_qubits,
        edges,
        charge_bound=config["charge_bound_ghz"] * _GHZ,
        flux_bound=config["flux_bound_ghz"] * _GHZ,
        coupling_bound=config["coupling_bound_ghz"] * _GHZ,
    )


def grape_config_for(config: dict, seed: int) -> GrapeConfig:
    return GrapeConfig(
        target_fidelity=config["target_fidelity"],
        max_iterations=config["max_iterations"],
        learning_rate=config["learning_rate"],
        decay_rate=config["decay_rate"],
        amplitude_penalty=config["amplitude_penalty"],
        rng_seed=seed,
        sample_rate_divisor=config["sample_rate_divisor"],
        dt=config["dt_ns"],
    )


def mintime_config_for(config: dict) -> MinTimeConfig:
    return MinTimeConfig(
        precision=config["mintime_precision_ns"], doubling_cap=config["doubling_cap"]
    )


def tuning_grid_for(config: dict) -> list[tuple[float, float]] | None:
    if not config["learning_rates"] and not config["decay_rates"]:
        return None
    rates = [float(x) for x in config["learning_rates"].split(",") if x.strip()]
    decays = [float(x) for x in config["decay_rates"].split(",") if x.strip()] or [0.9999]
    if not rates:
        raise CliError("learning_rates must be set when decay_rates is")
    return [(lr, dec) for lr in rates for dec in decays]


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")


def _parse_params(text: str | None, circuit: Circuit) -> tuple[float, ...]:
    values = tuple(float(x) for x in text.split(",")) if text else ()
    if len(values) != circuit.n_params:
        raise CliError(
            f"circuit takes {circuit.n_params} parameters, got {len(values)} via --params"
        )
    return values


def _load_library(path: str | None, spec: HamiltonianSpec, need_for: str) -> GatePulseLibrary:
    if path is None:
        # Instant exact fallback; durations are longer than a GRAPE-built
        # library, so build-library remains the serious route.
        return build_analytic_library(spec)
    file = Path(path)
    if file.is_dir():
        file = file / "library.json"
    library = GatePulseLibrary.from_json(json.loads(file.read_text(encoding="utf-8")))
    if library.spec_fingerprint != library_fingerprint(spec):
        raise CliError(f"library {file} was built for different hardware bounds ({need_for})")
    return library


def cmd_gen_qaoa(args) -> int:
    graph = bench.random_graph(args.nodes, args.kind, args.seed)
    circuit = bench.qaoa_circuit(bench.QaoaSpec(graph, args.p))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = f"qaoa_{args.kind}_n{args.nodes}_p{args.p}_s{args.seed}"
    qasm_io.save(circuit, out / f"{name}.vqc")
    _write_json(
        out / f"{name}.json",
        {
            "kind": args.kind,
            "nodes": args.nodes,
            "p": args.p,
            "seed": args.seed,
            "graph": {"n": graph.n, "edges": [list(e) for e in graph.edges]},
        },
    )
    print(out / f"{name}.vqc")
    return 0


def cmd_build_library(args) -> int:
    config = load_config(args.config)
    spec = spec_for(2, config)
    library = build_gate_library(
        spec, grape_config_for(config, args.seed), mintime_config_for(config)
    )
    out = Path(args.out)
    _write_json(out / "library.json" if out.suffix != ".json" else out, library.to_json())
    for kind, entry in sorted(library.entries.items()):
        print(f"{kind}: {entry.duration:.2f} ns at fidelity {entry.fidelity:.6f}")
    return 0


def cmd_precompute(args) -> int:
    config = load_config(args.config)
    circuit = qasm_io.load(args.circuit)
    spec = spec_for(circuit.n_qubits, config)
    plan = partition_strict(circuit) if args.mode == "strict" else partition_flexible(circuit)
    library = _load_library(args.library, spec, "precompute") if args.library else None
    cache = PulseCache(args.cache)
    report = precompute_strict(
        plan,
        spec,
        grape_config_for(config, args.seed),
        mintime_config_for(config),
        cache,
        library=library,
        jobs=args.jobs,
    )
    print(
        f"precomputed {report.computed} block(s), reused {report.reused}, "
        f"fallbacks {report.fallbacks}, iterations {report.optimizer_iterations}"
    )
    return 0


def cmd_tune(args) -> int:
    config = load_config(args.config)
    circuit = qasm_io.load(args.circuit)
    spec = spec_for(circuit.n_qubits, config)
    plan = partition_flexible(circuit)
    grid = None
    if args.grid:
        payload = json.loads(Path(args.grid).read_text(encoding="utf-8"))
        decays = payload.get("decay_rates", [0.9999])
        grid = [(float(lr), float(dec)) for lr in payload["learning_rates"] for dec in decays]
    else:
        grid = tuning_grid_for(config)
    tuned = tune_plan(
        plan,
        spec,
        grape_config_for(config, args.seed),
        grid=grid,
        n_samples=args.samples if args.samples else config["tune_samples"],
        jobs=args.jobs,
    )
    tuned.save(args.out)
    print(f"tuned {len(tuned)} block(s) -> {args.out}")
    return 0


def cmd_compile(args) -> int:
    config = load_config(args.config)
    circuit = qasm_io.load(args.circuit)
    values = _parse_params(args.params, circuit)
    spec = spec_for(circuit.n_qubits, config)
    grape_config = grape_config_for(config, args.seed)
    mintime_config = mintime_config_for(config)
    name = args.name or Path(args.circuit).stem

    if args.mode == "gate":
        library = _load_library(args.library, spec, "gate mode")
        schedule = compile_gate_based(circuit, values, library, spec)
    elif args.mode == "grape":
        library = _load_library(args.library, spec, "grape mode") if args.library else None
        schedule = compile_grape(
            circuit, values, spec, grape_config, mintime_config, library=library
        )
    elif args.mode == "strict":
        if not args.cache:
            raise CliError("strict mode needs --cache (run precompute first)")
        plan = partition_strict(circuit)
        schedule = compile_strict(plan, PulseCache(args.cache), values, spec, grape_config)
    else:
        if not args.tuned or not Path(args.tuned).exists():
            raise CliError("missing tuned hyperparameters (run tune, pass --tuned FILE)")
        plan = partition_flexible(circuit)
        tuned = TunedHyperparams.load(args.tuned)
        cache = PulseCache(args.cache) if args.cache else None
        library = _load_library(args.library, spec, "flexible mode") if args.library else None
        schedule = compile_flexible(
            plan, tuned, values, spec, grape_config, mintime_config, cache=cache, library=library
        )

    if circuit.n_qubits <= MAX_DENSE_WIDTH:
        verified = verify_schedule(schedule, circuit, values, spec)
        unverified = False
    else:
        verified = None
        unverified = True
    payload = schedule_to_json(
        schedule, spec, fidelity=verified, circuit=name, unverified=unverified
    )
    _write_json(Path(args.out), payload)
    fid_text = "unverified" if verified is None else f"{verified:.6f}"
    print(f"{name} [{args.mode}]: {schedule.total_duration:.2f} ns, fidelity {fid_text}")
    return 0


def cmd_verify(args) -> int:
    config = load_config(args.config)
    circuit = qasm_io.load(args.circuit)
    values = _parse_params(args.params, circuit)
    spec = spec_for(circuit.n_qubits, config)
    if circuit.n_qubits > MAX_DENSE_WIDTH:
        raise CliError(f"cannot verify widths above the dense cap {MAX_DENSE_WIDTH}")
    data = json.loads(Path(args.schedule).read_text(encoding="utf-8"))
    pulse, labels, _ = pulse_from_dict(data)
    expected = control_labels(spec)
    if labels != expected:
        raise CliError("schedule control labels do not match the system topology")
    achieved = propagate(pulse, build_controls(spec))
    fid = fidelity(achieved, build_unitary(circuit, values))
    print(f"fidelity {fid:.6f}")
    return 0


def cmd_report(args) -> int:
    rows = []
    for path in sorted(Path(args.input).glob("*.json")):
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            continue
        meta = data.get("meta")
        if not meta or "circuit" not in meta:
            continue
        fid = data.get("fidelity")
        rows.append(
            {
                "circuit": meta["circuit"],
                "mode": meta["mode"],
                "duration_ns": f"{meta['duration_ns']:.6g}",
                "fidelity": "unverified" if fid is None else f"{fid:.9f}",
                "grape_calls": meta["grape_searches"],
                "iterations": meta["optimizer_iterations"],
                "wall_ms": f"{meta['wall_clock_ms']:.3f}",
            }
        )
    rows.sort(key=lambda r: (r["circuit"], r["mode"]))
    fieldnames = ["circuit", "mode", "duration_ns", "fidelity", "grape_calls", "iterations", "wall_ms"]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    print(f"{len(rows)} row(s) -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vqcpulse", description="Pulse compilation for variational quantum circuits"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-qaoa", help="generate a QAOA MAXCUT benchmark circuit")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--kind", choices=bench.GRAPH_KINDS, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_qaoa)

    p = sub.add_parser("build-library", help="minimal-time pulses for the gate set")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_library)

    p = sub.add_parser("precompute", help="fill the pulse cache for a circuit's plan")
    p.add_argument("--circuit", required=True)
    p.add_argument("--mode", choices=("strict", "flexible"), required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--library", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_precompute)

    p = sub.add_parser("tune", help="grid-search optimizer hyperparameters per block")
    p.add_argument("--circuit", required=True)
    p.add_argument("--grid", default=None, help="JSON file with learning_rates/decay_rates")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("compile", help="compile a circuit at a parametrization")
    p.add_argument("--circuit", required=True)
    p.add_argument("--mode", choices=("gate", "grape", "strict", "flexible"), required=True)
    p.add_argument("--params", default=None, help="comma-separated parameter values")
    p.add_argument("--cache", default=None)
    p.add_argument("--tuned", default=None)
    p.add_argument("--library", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("verify", help="re-check a pulse file against its circuit")
    p.add_argument("--circuit", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--params", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="collect compile outputs into a CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, CompileError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
