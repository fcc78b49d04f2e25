"""End-to-end pulse compilation: the four strategies and their plumbing.

Modes
-----
* gate:     per-gate pulse lookup (library for h/cx/swap, closed-form
            rotations), gates overlapped by ASAP scheduling.
* grape:    width-bounded blocks of the bound circuit, each pushed
            through the minimal-time search at runtime.
* strict:   Fixed blocks served from a precomputed pulse cache plus
            closed-form rotation pulses; zero runtime optimization.
* flexible: single-parameter blocks searched at runtime with per-block
            pre-tuned optimizer hyperparameters.

A compiled schedule is a list of pulse segments with provenance; it can
be rendered onto the full register's time grid for export, or
propagated against the circuit's unitary to verify end-to-end fidelity.
"""
from __future__ import annotations

import hashlib
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .circuit import (
    Circuit,
    TABLE_GATE_TIMES,
    asap_schedule,
    bind_parameters,
    build_unitary,
    gate_matrix,
    merge_rotations,
)
from .grape import (
    ControlPulse,
    GrapeConfig,
    fidelity,
    grape_optimize,
    propagate,
    pulse_from_dict,
    pulse_to_dict,
)
from .hamiltonian import HamiltonianSpec, build_controls, control_labels
from .mintime import MinTimeConfig, MinTimeError, minimal_pulse_time, probe_seed
from .partition import FIXED, PARAM_GATE, SINGLE_PARAM, Block, PartitionPlan

LIBRARY_GATES = ("h", "cx", "swap", "rx", "rz")


class CompileError(RuntimeError):
    """Raised when a schedule cannot be produced as requested."""


class CacheMissError(CompileError):
    def __init__(self, block_key: str):
        super().__init__(f"pulse cache miss for block {block_key}")
        self.block_key = block_key


class LibraryBuildError(CompileError):
    pass


# ---------------------------------------------------------------------------
# Schedules


@dataclass(frozen=True)
class Segment:
    """One pulse placed at a start offset on a subset of the register."""

    pulse: ControlPulse = field(repr=False)
    labels: tuple[str, ...]
    qubits: tuple[int, ...]
    start: float
    source: str  # "library" | "cache" | "analytic" | "runtime_grape"
    detail: str = ""

    @property
    def duration(self) -> float:
        return self.pulse.total_time

    def parent_labels(self) -> tuple[str, ...]:
        """Map the segment-local field labels onto parent-register labels."""
        out = []
        for label in self.labels:
            kind, _, args = label.partition("[")
            idx = args.rstrip("]")
            if kind in ("charge", "flux"):
                out.append(f"{kind}[{self.qubits[int(idx)]}]")
            elif kind == "coupling":
                a, b = (self.qubits[int(i)] for i in idx.split(","))
                out.append(f"coupling[{min(a, b)},{max(a, b)}]")
            else:
                raise CompileError(f"unknown control label {label!r}")
        return tuple(out)


@dataclass
class RunStats:
    """Latency accounting for one compile invocation."""

    grape_searches: int = 0
    optimizer_iterations: int = 0
    wall_clock_ms: float = 0.0


@dataclass(frozen=True)
class CompiledSchedule:
    n_qubits: int
    mode: str
    segments: tuple[Segment, ...]
    total_duration: float
    stats: RunStats = field(default_factory=RunStats)


def schedule_to_pulse(
    schedule: CompiledSchedule, spec: HamiltonianSpec, dt: float | None = None
) -> tuple[ControlPulse, list[str]]:
    """Render all segments onto the full register's time grid.

    Raises if two overlapping segments drive the same control field;
    segments on disjoint fields may overlap freely (gate-based mode).
    """
    labels = control_labels(spec)
    index = {label: i for i, label in enumerate(labels)}
    if dt is None:
        dt = schedule.segments[0].pulse.dt if schedule.segments else 0.05
    n_steps = _steps(schedule.total_duration, dt, "schedule duration")
    amplitudes = np.zeros((len(labels), n_steps))
    occupied = np.zeros((len(labels), n_steps), dtype=bool)
    for seg in schedule.segments:
        if abs(seg.pulse.dt - dt) > 1e-12:
            raise CompileError(f"segment dt {seg.pulse.dt} differs from schedule dt {dt}")
        k0 = _steps(seg.start, dt, "segment offset")
        k1 = k0 + seg.pulse.n_steps
        if k1 > n_steps:
            raise CompileError("segment extends beyond the schedule duration")
        for row, label in enumerate(seg.parent_labels()):
            if label not in index:
                raise CompileError(f"segment drives {label}, absent from the system topology")
            f = index[label]
            if occupied[f, k0:k1].any():
                raise CompileError(f"overlapping segments drive {label}")
            occupied[f, k0:k1] = True
            amplitudes[f, k0:k1] = seg.pulse.amplitudes[row]
    return ControlPulse(dt, amplitudes), labels


def verify_schedule(
    schedule: CompiledSchedule,
    circuit: Circuit,
    values: Sequence[float],
    spec: HamiltonianSpec,
) -> float:
    """End-to-end trace fidelity of the rendered schedule vs the circuit."""
    if schedule.n_qubits != circuit.n_qubits or spec.n_qubits != circuit.n_qubits:
        raise CompileError("schedule, circuit, and system widths must agree")
    pulse, _ = schedule_to_pulse(schedule, spec)
    achieved = propagate(pulse, build_controls(spec))
    return fidelity(achieved, build_unitary(circuit, values))


def schedule_to_json(schedule: CompiledSchedule, spec: HamiltonianSpec, **meta) -> dict:
    pulse, labels = schedule_to_pulse(schedule, spec)
    data = pulse_to_dict(pulse, labels, meta.pop("fidelity", None))
    data["meta"] = {
        "mode": schedule.mode,
        "duration_ns": schedule.total_duration,
        "grape_searches": schedule.stats.grape_searches,
        "optimizer_iterations": schedule.stats.optimizer_iterations,
        "wall_clock_ms": schedule.stats.wall_clock_ms,
        **meta,
    }
    return data


def _steps(duration: float, dt: float, what: str) -> int:
    steps = int(round(duration / dt))
    if abs(steps * dt - duration) > 1e-6:
        raise CompileError(f"{what} {duration} ns is not a multiple of dt {dt} ns")
    return steps


# ---------------------------------------------------------------------------
# Closed-form pulses

_TWO_PI = 2.0 * math.pi


def _shortest_angle(angle: float) -> float:
    """Reduce to (-pi, pi], the shortest rotation realizing the same gate."""
    reduced = math.fmod(angle, _TWO_PI)
    if reduced > math.pi:
        reduced -= _TWO_PI
    elif reduced <= -math.pi:
        reduced += _TWO_PI
    return reduced


def _piece(area: float, bound: float, dt: float) -> tuple[int, float]:
    """Steps and constant amplitude realizing ``integral(u dt) == area``."""
    if area == 0.0:
        return 0, 0.0
    steps = max(1, math.ceil(abs(area) / bound / dt - 1e-12))
    return steps, area / (steps * dt)


def analytic_rotation_pulse(
    kind: str, angle: float, spec: HamiltonianSpec, dt: float = 0.05
) -> ControlPulse:
    """Exact single-qubit rotation pulse on a one-qubit register.

    Rz rides the flux drive, Rx the charge drive, both at the largest
    amplitude that still hits the target angle exactly on the time
    grid, taking the shorter rotation direction.  Duration therefore
    scales linearly with the reduced angle; a zero rotation is an empty
    pulse.
    """
    if kind not in ("rz", "rx"):
        raise CompileError(f"{kind} has no closed-form rotation pulse")
    reduced = _shortest_angle(angle)
    if abs(reduced) < 1e-12:
        return ControlPulse(dt, np.zeros((2, 0)))
    if kind == "rz":
        # flux drive: exp(-i w t |1><1|) = diag(1, e^{-i w t}) = Rz(-w t)
        steps, amp = _piece(-reduced, spec.flux_bound, dt)
        rows = np.zeros((2, steps))
        rows[1, :] = amp
    else:
        # charge drive: exp(-i w t sigma_x) realizes Rx(2 w t) up to phase
        steps, amp = _piece(reduced / 2.0, spec.charge_bound, dt)
        rows = np.zeros((2, steps))
        rows[0, :] = amp
    return ControlPulse(dt, rows)


def analytic_rotation_duration(
    kind: str, angle: float, spec: HamiltonianSpec, dt: float = 0.05
) -> float:
    reduced = _shortest_angle(angle)
    if abs(reduced) < 1e-12:
        return 0.0
    bound = spec.flux_bound if kind == "rz" else spec.charge_bound
    area = abs(reduced) if kind == "rz" else abs(reduced) / 2.0
    return _piece(area, bound, dt)[0] * dt


def _moments_pulse(
    n_qubits: int,
    spec: HamiltonianSpec,
    dt: float,
    moments: Iterable[Iterable[tuple[str, float, float]]],
) -> ControlPulse:
    """Concatenate moments of parallel constant drives into one pulse.

    Each moment is a list of (label, area, bound); drives within a
    moment start together and shorter ones pad with zeros.
    """
    sub = HamiltonianSpec(
        n_qubits,
        ((0, 1),) if n_qubits == 2 else (),
        spec.charge_bound,
        spec.flux_bound,
        spec.coupling_bound,
    )
    labels = control_labels(sub)
    index = {label: i for i, label in enumerate(labels)}
    columns = []
    for moment in moments:
        pieces = [(index[label], *_piece(area, bound, dt)) for label, area, bound in moment]
        width = max((steps for _, steps, _ in pieces), default=0)
        if width == 0:
            continue
        block = np.zeros((len(labels), width))
        for row, steps, amp in pieces:
            block[row, :steps] = amp
        columns.append(block)
    if not columns:
        return ControlPulse(dt, np.zeros((len(labels), 0)))
    return ControlPulse(dt, np.hstack(columns))


def _h_moments(qubit: int, spec: HamiltonianSpec) -> list[list[tuple[str, float, float]]]:
    # H = diag(1, e^{-i pi/2}) . exp(+i pi/4 sigma_x) . diag(1, e^{-i pi/2});
    # a flux piece of area A realizes diag(1, e^{-iA}), a charge piece
    # exp(-iA sigma_x), so the three pieces below compose to exactly H.
    flux = (f"flux[{qubit}]", math.pi / 2.0, spec.flux_bound)
    charge = (f"charge[{qubit}]", -math.pi / 4.0, spec.charge_bound)
    return [[flux], [charge], [flux]]


def analytic_gate_pulse(
    kind: str, angle: float | None, spec: HamiltonianSpec, dt: float = 0.05
) -> ControlPulse:
    """Closed-form pulse for any library gate, on its own 1-2 qubit register.

    Rotations are direct drives; h/cx/swap are built from exact drive
    identities (fidelity 1 up to float error) and therefore run longer
    than optimized pulses.  cx/swap use the (0,1) coupling.
    """
    if kind in ("rz", "rx"):
        return analytic_rotation_pulse(kind, angle if angle is not None else math.pi, spec, dt)
    if kind == "h":
        return _moments_pulse(1, spec, dt, _h_moments(0, spec))
    if kind not in ("cx", "swap"):
        raise CompileError(f"no closed-form pulse for gate kind {kind!r}")
    xx_quarter = [("coupling[0,1]", math.pi / 4.0, spec.coupling_bound)]
    s_dag = [(f"flux[{q}]", math.pi / 2.0, spec.flux_bound) for q in (0, 1)]
    s_fwd = [(f"flux[{q}]", -math.pi / 2.0, spec.flux_bound) for q in (0, 1)]
    both_h = [m0 + m1 for m0, m1 in zip(_h_moments(0, spec), _h_moments(1, spec))]
    if kind == "cx":
        # CX = (I x H) . CZ . (I x H); CZ from an XX quarter-turn
        # conjugated by Hadamards plus local Z quarter-turns.
        moments = (
            _h_moments(1, spec) + both_h + [xx_quarter] + both_h + [s_dag] + _h_moments(1, spec)
        )
    else:
        # SWAP ~ XX(pi/4) . YY(pi/4) . ZZ(pi/4); YY and ZZ are the XX
        # quarter-turn conjugated by S and H respectively.
        moments = (
            [xx_quarter] + [s_dag] + [xx_quarter] + [s_fwd] + both_h + [xx_quarter] + both_h
        )
    return _moments_pulse(2, spec, dt, moments)


# ---------------------------------------------------------------------------
# Gate pulse library


@dataclass(frozen=True)
class LibraryEntry:
    pulse: ControlPulse = field(repr=False)
    labels: tuple[str, ...]
    duration: float
    fidelity: float


@dataclass(frozen=True)
class GatePulseLibrary:
    """Precomputed pulses for the lookup-table gate set (rotations at pi)."""

    entries: Mapping[str, LibraryEntry]
    spec_fingerprint: str
    dt: float

    def duration(self, kind: str) -> float:
        return self.entries[kind].duration

    def gate_times(self) -> dict[str, float]:
        return {kind: entry.duration for kind, entry in self.entries.items()}

    def to_json(self) -> dict:
        return {
            "spec_fingerprint": self.spec_fingerprint,
            "dt_ns": self.dt,
            "entries": {
                kind: pulse_to_dict(e.pulse, e.labels, e.fidelity)
                for kind, e in self.entries.items()
            },
        }

    @staticmethod
    def from_json(data: dict) -> "GatePulseLibrary":
        entries = {}
        for kind, payload in data["entries"].items():
            pulse, labels, fid = pulse_from_dict(payload)
            entries[kind] = LibraryEntry(pulse, tuple(labels), pulse.total_time, fid)
        return GatePulseLibrary(entries, data["spec_fingerprint"], float(data["dt_ns"]))


def _gate_target(kind: str) -> np.ndarray:
    return gate_matrix(kind, math.pi if kind in ("rx", "rz") else None)


def _gate_subspec(kind: str, spec: HamiltonianSpec) -> HamiltonianSpec:
    n = 2 if kind in ("cx", "swap") else 1
    return HamiltonianSpec(
        n, ((0, 1),) if n == 2 else (), spec.charge_bound, spec.flux_bound, spec.coupling_bound
    )


def library_fingerprint(spec: HamiltonianSpec) -> str:
    """Identity of a library: the drive bounds, independent of topology."""
    return _gate_subspec("cx", spec).fingerprint()


def build_gate_library(
    spec: HamiltonianSpec,
    grape_config: GrapeConfig,
    mintime_config: MinTimeConfig = MinTimeConfig(),
) -> GatePulseLibrary:
    """Minimal-time pulses for h, cx, swap and the pi rotations.

    Searches start from the reference table durations; failure to
    converge for any gate aborts the build, naming the gate.
    """
    entries = {}
    for kind in LIBRARY_GATES:
        subspec = _gate_subspec(kind, spec)
        try:
            result = minimal_pulse_time(
                _gate_target(kind),
                subspec,
                grape_config,
                mintime_config,
                baseline_runtime=TABLE_GATE_TIMES[kind],
            )
        except MinTimeError as exc:
            raise LibraryBuildError(f"library build failed for gate {kind}: {exc}") from exc
        entries[kind] = LibraryEntry(
            result.pulse,
            tuple(control_labels(subspec)),
            result.minimal_time,
            result.fidelity,
        )
    return GatePulseLibrary(entries, library_fingerprint(spec), grape_config.effective_dt)


def build_analytic_library(spec: HamiltonianSpec, dt: float = 0.05) -> GatePulseLibrary:
    """Closed-form library: instant to build, exact, but not time-optimal.

    Useful as a cheap stand-in where pulse duration does not matter and
    as the fallback pulse source when a block search fails.
    """
    entries = {}
    for kind in LIBRARY_GATES:
        subspec = _gate_subspec(kind, spec)
        pulse = analytic_gate_pulse(kind, math.pi, spec, dt)
        achieved = propagate(pulse, build_controls(subspec))
        entries[kind] = LibraryEntry(
            pulse,
            tuple(control_labels(subspec)),
            pulse.total_time,
            fidelity(achieved, _gate_target(kind)),
        )
    return GatePulseLibrary(entries, library_fingerprint(spec), dt)


# ---------------------------------------------------------------------------
# Gate-based compilation


def _gate_durations(
    circuit: Circuit, spec: HamiltonianSpec, dt: float, library: GatePulseLibrary | None
) -> list[float]:
    """Per-gate pulse durations for a bound circuit."""
    durations = []
    for g in circuit.gates:
        if g.kind in ("rz", "rx"):
            durations.append(analytic_rotation_duration(g.kind, g.angle.offset, spec, dt))
        elif library is not None:
            durations.append(library.duration(g.kind))
        else:
            durations.append(TABLE_GATE_TIMES[g.kind])
    return durations


def gate_baseline(
    circuit: Circuit,
    spec: HamiltonianSpec,
    dt: float,
    library: GatePulseLibrary | None = None,
) -> float:
    """Gate-based critical-path runtime of a bound circuit (ns)."""
    return asap_schedule(circuit, _gate_durations(circuit, spec, dt, library))[1]


def compile_gate_based(
    circuit: Circuit,
    values: Sequence[float],
    library: GatePulseLibrary,
    spec: HamiltonianSpec,
) -> CompiledSchedule:
    """Lookup-table compilation: one pulse segment per gate, ASAP-overlapped."""
    t0 = time.perf_counter()
    dt = library.dt
    bound = merge_rotations(bind_parameters(circuit, values))
    durations = _gate_durations(bound, spec, dt, library)
    starts, total = asap_schedule(bound, durations)
    segments = []
    for g, start, duration in zip(bound.gates, starts, durations):
        if duration == 0.0:
            continue  # identity rotations are skipped
        if g.kind in ("rz", "rx"):
            pulse = analytic_rotation_pulse(g.kind, g.angle.offset, spec, dt)
            labels = ("charge[0]", "flux[0]")
            source, detail = "analytic", g.kind
        else:
            entry = library.entries[g.kind]
            pulse, labels = entry.pulse, entry.labels
            source, detail = "library", g.kind
        if g.kind in ("cx", "swap"):
            edge = (min(g.qubits), max(g.qubits))
            if edge not in spec.edges:
                raise CompileError(f"{g.kind} on {g.qubits} has no coupling {edge} in the system")
        segments.append(Segment(pulse, labels, g.qubits, start, source, detail))
    stats = RunStats(wall_clock_ms=(time.perf_counter() - t0) * 1e3)
    return CompiledSchedule(circuit.n_qubits, "gate", tuple(segments), total, stats)


# ---------------------------------------------------------------------------
# Pulse cache and strict compilation


def cache_key(block: Block, spec: HamiltonianSpec, grape_config: GrapeConfig) -> str:
    """Content hash of a block joined with the physics it was compiled for."""
    subspec = spec.restricted(block.qubits)
    payload = "|".join(
        [
            block.text(),
            subspec.fingerprint(),
            f"{grape_config.target_fidelity!r}",
            f"{grape_config.effective_dt!r}",
        ]
    )
    return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(frozen=True)
class CacheEntry:
    pulse: ControlPulse = field(repr=False)
    labels: tuple[str, ...]
    duration: float
    fidelity: float
    block_text: str
    source: str = "runtime_grape"


class PulseCache:
    """Content-addressed pulse store; optionally persisted one JSON per key."""

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._memory: dict[str, CacheEntry] = {}

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def __contains__(self, key: str) -> bool:
        return self.get(key) is not None

    def get(self, key: str) -> CacheEntry | None:
        if key in self._memory:
            return self._memory[key]
        if self.directory is not None and self._path(key).exists():
            data = _read_json(self._path(key))
            pulse, labels, fid = pulse_from_dict(data["pulse"])
            entry = CacheEntry(
                pulse, tuple(labels), pulse.total_time, fid, data["block_text"], data["source"]
            )
            self._memory[key] = entry
            return entry
        return None

    def put(self, key: str, entry: CacheEntry) -> None:
        self._memory[key] = entry
        if self.directory is not None:
            payload = {
                "key": key,
                "block_text": entry.block_text,
                "source": entry.source,
                "pulse": pulse_to_dict(entry.pulse, entry.labels, entry.fidelity),
            }
            _write_json(self._path(key), payload)

    def __len__(self) -> int:
        if self.directory is not None:
            on_disk = {p.stem for p in self.directory.glob("*.json")}
            return len(on_disk | set(self._memory))
        return len(self._memory)


def _read_json(path: Path) -> dict:
    import json

    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _write_json(path: Path, payload: dict) -> None:
    import json

    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")


@dataclass
class PrecomputeReport:
    computed: int = 0
    reused: int = 0
    fallbacks: int = 0
    grape_searches: int = 0
    optimizer_iterations: int = 0
    wall_clock_ms: float = 0.0


def _gate_pulse_schedule(
    circuit: Circuit, spec: HamiltonianSpec, library: GatePulseLibrary
) -> tuple[ControlPulse, float]:
    """Render a bound circuit's gate-based schedule into one pulse."""
    schedule = compile_gate_based(circuit, (), library, spec)
    pulse, _ = schedule_to_pulse(schedule, spec, library.dt)
    return pulse, schedule.total_duration


def _precompute_block(
    block: Block,
    spec: HamiltonianSpec,
    grape_config: GrapeConfig,
    mintime_config: MinTimeConfig,
    library: GatePulseLibrary | None,
) -> tuple[CacheEntry, int, int, int]:
    """Minimal-time compile one Fixed block; returns (entry, searches, iters, fallback)."""
    subspec = spec.restricted(block.qubits)
    target = block.unitary()
    baseline = gate_baseline(block.subcircuit, subspec, grape_config.effective_dt, library)
    try:
        result = minimal_pulse_time(
            target, subspec, grape_config, mintime_config, baseline_runtime=baseline
        )
    except MinTimeError as exc:
        if library is None:
            raise CompileError(
                f"no convergence while precompiling block {block.content_hash()[:12]}: {exc}"
            ) from exc
        pulse, duration = _gate_pulse_schedule(block.subcircuit, subspec, library)
        fid = fidelity(propagate(pulse, build_controls(subspec)), target)
        entry = CacheEntry(
            pulse, tuple(control_labels(subspec)), duration, fid, block.text(), "gate_fallback"
        )
        return entry, len(exc.probes), 0, 1
    entry = CacheEntry(
        result.pulse,
        tuple(control_labels(subspec)),
        result.minimal_time,
        result.fidelity,
        block.text(),
    )
    return entry, result.grape_runs, result.iterations_total, 0


def precompute_strict(
    plan: PartitionPlan,
    spec: HamiltonianSpec,
    grape_config: GrapeConfig,
    mintime_config: MinTimeConfig,
    cache: PulseCache,
    library: GatePulseLibrary | None = None,
    jobs: int = 1,
) -> PrecomputeReport:
    """Fill the pulse cache for every Fixed block of a plan; idempotent.

    When a ``library`` is supplied, a block whose search fails falls
    back to the block's own gate-based pulse (never slower than the
    block's gate baseline); without one the failure propagates.
    """
    report = PrecomputeReport()
    t0 = time.perf_counter()
    todo: dict[str, Block] = {}
    for block in plan.blocks:
        if block.tag != FIXED:
            continue
        key = cache_key(block, spec, grape_config)
        if cache.get(key) is not None or key in todo:
            report.reused += 1
            continue
        todo[key] = block

    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                key: pool.submit(
                    _precompute_block, block, spec, grape_config, mintime_config, library
                )
                for key, block in todo.items()
            }
            results = {key: fut.result() for key, fut in futures.items()}
    else:
        results = {
            key: _precompute_block(block, spec, grape_config, mintime_config, library)
            for key, block in todo.items()
        }

    for key, (entry, searches, iters, fallback) in results.items():
        cache.put(key, entry)
        report.computed += 1
        report.fallbacks += fallback
        report.grape_searches += searches
        report.optimizer_iterations += iters
    report.wall_clock_ms = (time.perf_counter() - t0) * 1e3
    return report


def compile_strict(
    plan: PartitionPlan,
    cache: PulseCache,
    values: Sequence[float],
    spec: HamiltonianSpec,
    grape_config: GrapeConfig,
) -> CompiledSchedule:
    """Concatenate cached Fixed pulses with closed-form rotation pulses.

    Pure lookup: performs zero optimizer work at compile time.  Raises
    on any cache miss, naming the offending block.
    """
    t0 = time.perf_counter()
    dt = grape_config.effective_dt
    segments = []
    offset = 0.0
    for block in plan.blocks:
        if block.tag == FIXED:
            key = cache_key(block, spec, grape_config)
            entry = cache.get(key)
            if entry is None:
                raise CacheMissError(key)
            if entry.pulse.n_steps:
                segments.append(
                    Segment(entry.pulse, entry.labels, block.qubits, offset, "cache", key)
                )
                offset += entry.pulse.total_time
        elif block.tag == PARAM_GATE:
            gate = block.subcircuit.gates[0]
            angle = gate.angle.evaluate(values)
            pulse = analytic_rotation_pulse(gate.kind, angle, spec, dt)
            if pulse.n_steps:
                segments.append(
                    Segment(
                        pulse, ("charge[0]", "flux[0]"), block.qubits, offset, "analytic", gate.kind
                    )
                )
                offset += pulse.total_time
        else:
            raise CompileError(f"strict compilation cannot place a {block.tag} block")
    stats = RunStats(wall_clock_ms=(time.perf_counter() - t0) * 1e3)
    return CompiledSchedule(plan.parent.n_qubits, "strict", tuple(segments), offset, stats)


# ---------------------------------------------------------------------------
# Full-GRAPE compilation


def compile_grape(
    circuit: Circuit,
    values: Sequence[float],
    spec: HamiltonianSpec,
    grape_config: GrapeConfig,
    mintime_config: MinTimeConfig = MinTimeConfig(),
    library: GatePulseLibrary | None = None,
    max_width: int = 4,
) -> CompiledSchedule:
    """Minimal-time search over width-bounded blocks of the bound circuit."""
    from .partition import block_max_width

    t0 = time.perf_counter()
    bound = merge_rotations(bind_parameters(circuit, values))
    segments = []
    stats = RunStats()
    offset = 0.0
    for i, block in enumerate(block_max_width(bound, max_width)):
        subspec = spec.restricted(block.qubits)
        baseline = gate_baseline(block.subcircuit, subspec, grape_config.effective_dt, library)
        cfg = replace(grape_config, rng_seed=probe_seed(grape_config.rng_seed, 1000 + i))
        result = minimal_pulse_time(
            block.unitary(), subspec, cfg, mintime_config, baseline_runtime=baseline
        )
        stats.grape_searches += 1
        stats.optimizer_iterations += result.iterations_total
        if result.pulse.n_steps:
            segments.append(
                Segment(
                    result.pulse,
                    tuple(control_labels(subspec)),
                    block.qubits,
                    offset,
                    "runtime_grape",
                    block.content_hash()[:12],
                )
            )
            offset += result.minimal_time
    stats.wall_clock_ms = (time.perf_counter() - t0) * 1e3
    return CompiledSchedule(circuit.n_qubits, "grape", tuple(segments), offset, stats)


# ---------------------------------------------------------------------------
# Hyperparameter tuning and flexible compilation


@dataclass(frozen=True)
class GridEval:
    learning_rate: float
    decay_rate: float
    mean_infidelity: float
    mean_iterations: float
    per_angle_infidelity: tuple[float, ...]
    per_angle_iterations: tuple[int, ...]


@dataclass(frozen=True)
class TunedEntry:
    learning_rate: float
    decay_rate: float
    score: float
    evaluations: tuple[GridEval, ...] = ()


def default_grid() -> list[tuple[float, float]]:
    """Log-spaced learning rates [1e-3, 1] x decay rates {0.999, 0.9999, 1}."""
    rates = np.logspace(-3.0, 0.0, 7)
    decays = (0.999, 0.9999, 1.0)
    return [(float(lr), float(dec)) for lr in rates for dec in decays]


def tune_hyperparameters(
    block: Block,
    angle_samples: Sequence[float],
    grid: Sequence[tuple[float, float]],
    spec: HamiltonianSpec,
    grape_config: GrapeConfig,
    fixed_time: float,
) -> TunedEntry:
    """Grid-search (learning rate, decay) for one block at a fixed duration.

    Every grid point optimizes the block at each sampled angle with the
    same iteration budget; the score is mean final infidelity, with
    ties broken by mean iterations-to-target, then smaller learning
    rate.  Non-converged runs count the full budget.
    """
    if not angle_samples:
        raise CompileError("angle_samples must be nonempty")
    if not grid:
        raise CompileError("hyperparameter grid must be nonempty")
    if block.tag not in (SINGLE_PARAM, FIXED):
        raise CompileError(f"cannot tune a {block.tag} block")
    subspec = spec.restricted(block.qubits)
    controls = build_controls(subspec)
    evaluations = []
    for gi, (lr, decay) in enumerate(grid):
        infids, iters = [], []
        for ai, angle in enumerate(angle_samples):
            values = np.zeros(block.subcircuit.n_params)
            if block.param_index is not None:
                values[block.param_index] = angle
            target = block.unitary(values)
            cfg = replace(
                grape_config,
                learning_rate=lr,
                decay_rate=decay,
                rng_seed=probe_seed(grape_config.rng_seed, 7919 * gi + ai),
            )
            result = grape_optimize(target, subspec, cfg, fixed_time, controls=controls)
            infids.append(1.0 - result.fidelity)
            iters.append(
                result.iterations_used if result.converged else grape_config.max_iterations
            )
        evaluations.append(
            GridEval(
                lr,
                decay,
                float(np.mean(infids)),
                float(np.mean(iters)),
                tuple(infids),
                tuple(iters),
            )
        )
    best = min(
        evaluations,
        key=lambda e: (e.mean_infidelity, e.mean_iterations, e.learning_rate, e.decay_rate),
    )
    return TunedEntry(best.learning_rate, best.decay_rate, best.mean_infidelity, tuple(evaluations))


class TunedHyperparams:
    """Block content hash -> tuned (learning_rate, decay_rate, score)."""

    def __init__(self, entries: dict[str, TunedEntry] | None = None):
        self.entries = dict(entries or {})

    def get(self, key: str) -> TunedEntry | None:
        return self.entries.get(key)

    def put(self, key: str, entry: TunedEntry) -> None:
        self.entries[key] = entry

    def __len__(self) -> int:
        return len(self.entries)

    def to_json(self) -> dict:
        return {
            key: {
                "learning_rate": e.learning_rate,
                "decay_rate": e.decay_rate,
                "score": e.score,
                "evaluations": [
                    {
                        "learning_rate": g.learning_rate,
                        "decay_rate": g.decay_rate,
                        "mean_infidelity": g.mean_infidelity,
                        "mean_iterations": g.mean_iterations,
                        "per_angle_infidelity": list(g.per_angle_infidelity),
                        "per_angle_iterations": list(g.per_angle_iterations),
                    }
                    for g in e.evaluations
                ],
            }
            for key, e in self.entries.items()
        }

    @staticmethod
    def from_json(data: dict) -> "TunedHyperparams":
        entries = {}
        for key, payload in data.items():
            evaluations = tuple(
                GridEval(
                    g["learning_rate"],
                    g["decay_rate"],
                    g["mean_infidelity"],
                    g["mean_iterations"],
                    tuple(g["per_angle_infidelity"]),
                    tuple(g["per_angle_iterations"]),
                )
                for g in payload.get("evaluations", [])
            )
            entries[key] = TunedEntry(
                payload["learning_rate"], payload["decay_rate"], payload["score"], evaluations
            )
        return TunedHyperparams(entries)

    def save(self, path) -> None:
        _write_json(Path(path), self.to_json())

    @staticmethod
    def load(path) -> "TunedHyperparams":
        return TunedHyperparams.from_json(_read_json(Path(path)))


def _tune_block(
    block: Block,
    spec: HamiltonianSpec,
    grape_config: GrapeConfig,
    grid: Sequence[tuple[float, float]],
    angle_samples: Sequence[float],
    library: GatePulseLibrary | None,
) -> TunedEntry:
    # Tune at the largest gate baseline over the sampled angles, so the
    # duration is feasible for everything the grid search will see.
    subspec = spec.restricted(block.qubits)
    fixed_time = grape_config.effective_dt
    for angle in angle_samples:
        values = np.zeros(block.subcircuit.n_params)
        if block.param_index is not None:
            values[block.param_index] = angle
        bound = block.bound_subcircuit(values)
        fixed_time = max(
            fixed_time, gate_baseline(bound, subspec, grape_config.effective_dt, library)
        )
    return tune_hyperparameters(block, angle_samples, grid, spec, grape_config, fixed_time)


def tune_plan(
    plan: PartitionPlan,
    spec: HamiltonianSpec,
    grape_config: GrapeConfig,
    grid: Sequence[tuple[float, float]] | None = None,
    n_samples: int = 3,
    library: GatePulseLibrary | None = None,
    jobs: int = 1,
) -> TunedHyperparams:
    """Tune every single-parameter block of a plan at its gate baseline time."""
    grid = list(grid) if grid is not None else default_grid()
    rng = np.random.default_rng(grape_config.rng_seed)
    tuned = TunedHyperparams()
    tasks: dict[str, tuple[Block, tuple[float, ...]]] = {}
    for block in plan.blocks:
        if block.tag != SINGLE_PARAM:
            continue
        key = cache_key(block, spec, grape_config)
        angles = tuple(float(a) for a in rng.uniform(0.0, 2.0 * math.pi, size=n_samples))
        if key not in tasks:
            tasks[key] = (block, angles)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                key: pool.submit(_tune_block, block, spec, grape_config, grid, angles, library)
                for key, (block, angles) in tasks.items()
            }
            for key, fut in futures.items():
                tuned.put(key, fut.result())
    else:
        for key, (block, angles) in tasks.items():
            tuned.put(key, _tune_block(block, spec, grape_config, grid, angles, library))
    return tuned


def compile_flexible(
    plan: PartitionPlan,
    tuned: TunedHyperparams,
    values: Sequence[float],
    spec: HamiltonianSpec,
    grape_config: GrapeConfig,
    mintime_config: MinTimeConfig = MinTimeConfig(),
    cache: PulseCache | None = None,
    library: GatePulseLibrary | None = None,
) -> CompiledSchedule:
    """Runtime minimal-time search per single-parameter block, pre-tuned.

    Exactly one search per single-parameter block; Fixed blocks (which
    only appear for parameter-free circuits) come from the cache.
    """
    t0 = time.perf_counter()
    segments = []
    stats = RunStats()
    offset = 0.0
    for i, block in enumerate(plan.blocks):
        if block.tag == FIXED:
            if cache is None:
                raise CacheMissError(cache_key(block, spec, grape_config))
            key = cache_key(block, spec, grape_config)
            entry = cache.get(key)
            if entry is None:
                raise CacheMissError(key)
            if entry.pulse.n_steps:
                segments.append(
                    Segment(entry.pulse, entry.labels, block.qubits, offset, "cache", key)
                )
                offset += entry.pulse.total_time
            continue
        if block.tag != SINGLE_PARAM:
            raise CompileError(f"flexible compilation cannot place a {block.tag} block")
        key = cache_key(block, spec, grape_config)
        entry = tuned.get(key)
        if entry is None:
            raise CompileError(
                f"missing tuned hyperparameters for block {block.content_hash()[:12]}"
            )
        bound = block.bound_subcircuit(values)
        subspec = spec.restricted(block.qubits)
        baseline = gate_baseline(bound, subspec, grape_config.effective_dt, library)
        cfg = replace(
            grape_config,
            learning_rate=entry.learning_rate,
            decay_rate=entry.decay_rate,
            rng_seed=probe_seed(grape_config.rng_seed, 5000 + i),
        )
        result = minimal_pulse_time(
            build_unitary(bound),
            subspec,
            cfg,
            mintime_config,
            baseline_runtime=max(baseline, grape_config.effective_dt),
        )
        stats.grape_searches += 1
        stats.optimizer_iterations += result.iterations_total
        if result.pulse.n_steps:
            segments.append(
                Segment(
                    result.pulse,
                    tuple(control_labels(subspec)),
                    block.qubits,
                    offset,
                    "runtime_grape",
                    key,
                )
            )
            offset += result.minimal_time
    stats.wall_clock_ms = (time.perf_counter() - t0) * 1e3
    return CompiledSchedule(plan.parent.n_qubits, "flexible", tuple(segments), offset, stats)
