"""Binary search for the shortest pulse duration reaching target fidelity.

Feasibility of a candidate duration is one GRAPE run: did it converge
within its iteration budget?  The search first probes an upper bound
(by default the gate-based critical-path runtime of the target, which
partial compilation must beat anyway), doubling a capped number of
times if that fails, then bisects downward on the pulse time grid.
Every probe gets a fresh RNG seed derived deterministically from the
base seed and the probe index, and the winning pulse is re-verified by
direct propagation before being returned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .grape import ControlPulse, GrapeConfig, GrapeResult, fidelity, grape_optimize, propagate
from .hamiltonian import ControlField, HamiltonianSpec, build_controls


class MinTimeError(RuntimeError):
    """No feasible pulse time found; carries the probe log."""

    def __init__(self, message: str, probes: tuple[tuple[float, bool], ...]):
        super().__init__(message)
        self.probes = probes


@dataclass(frozen=True)
class MinTimeConfig:
    """Search settings: window precision and upper-bound policy.

    ``explicit_upper_bound`` of None selects the gate-baseline policy,
    in which the caller's ``baseline_runtime`` anchors the search.
    """

    precision: float = 0.3
    explicit_upper_bound: float | None = None
    doubling_cap: float = 4.0

    def __post_init__(self):
        if self.precision <= 0:
            raise ValueError("precision must be positive")
        if self.doubling_cap < 1:
            raise ValueError("doubling_cap must be >= 1")


@dataclass(frozen=True)
class MinTimeResult:
    minimal_time: float
    pulse: ControlPulse
    fidelity: float
    probes: tuple[tuple[float, bool], ...]
    iterations_total: int = 0
    grape_runs: int = 0


def probe_seed(base_seed: int, probe_index: int) -> int:
    """Deterministic per-probe seed; fresh randomness for every probe."""
    ss = np.random.SeedSequence(entropy=(int(base_seed) & (2**63 - 1), probe_index))
    return int(ss.generate_state(1, dtype=np.uint64)[0] & (2**31 - 1))


def minimal_pulse_time(
    target: np.ndarray,
    spec: HamiltonianSpec,
    grape_config: GrapeConfig,
    mintime_config: MinTimeConfig = MinTimeConfig(),
    baseline_runtime: float | None = None,
    controls: Sequence[ControlField] | None = None,
) -> MinTimeResult:
    """Shortest duration (to within ``precision``) at which GRAPE converges.

    Probe durations are multiples of the pulse time step, rounded up.
    Returns the shortest *probed* feasible time together with its pulse.
    """
    if controls is None:
        controls = build_controls(spec)
    dt = grape_config.effective_dt
    precision = mintime_config.precision
    if precision < dt:
        raise ValueError(f"precision {precision} ns is below the time step {dt} ns")

    probes: list[tuple[float, bool]] = []
    iterations = 0
    runs = 0

    # A zero-duration pulse is the identity; identity-like targets are done
    # before the upper bound is even consulted.
    dim = target.shape[0]
    zero_fid = fidelity(np.eye(dim, dtype=complex), target)
    if zero_fid >= grape_config.target_fidelity:
        probes.append((0.0, True))
        empty = ControlPulse(dt, np.zeros((len(controls), 0)))
        return MinTimeResult(0.0, empty, zero_fid, tuple(probes), 0, 0)

    if mintime_config.explicit_upper_bound is not None:
        upper = mintime_config.explicit_upper_bound
    else:
        if baseline_runtime is None or baseline_runtime <= 0:
            raise ValueError("gate-baseline policy requires a positive baseline_runtime")
        upper = baseline_runtime

    def run_probe(steps: int) -> GrapeResult:
        nonlocal iterations, runs
        seed = probe_seed(grape_config.rng_seed, len(probes))
        cfg = replace(grape_config, rng_seed=seed)
        result = grape_optimize(target, spec, cfg, steps * dt, controls=controls)
        probes.append((steps * dt, result.converged))
        iterations += result.iterations_used
        runs += 1
        return result

    # Phase 1: find a feasible upper bound, doubling up to the cap.
    base_steps = max(1, math.ceil(upper / dt - 1e-9))
    steps = base_steps
    feasible: GrapeResult | None = None
    while True:
        result = run_probe(steps)
        if result.converged:
            feasible = result
            break
        if steps >= base_steps * mintime_config.doubling_cap:
            raise MinTimeError(
                f"no convergence up to {steps * dt:.2f} ns "
                f"(upper bound {upper:.2f} ns, doubling cap {mintime_config.doubling_cap}x)",
                tuple(probes),
            )
        steps = min(steps * 2, math.ceil(base_steps * mintime_config.doubling_cap))

    # Phase 2: bisect [0, feasible] on the step grid.
    lo_steps = 0
    hi_steps = steps
    best = feasible
    while (hi_steps - lo_steps) * dt > precision:
        mid = (lo_steps + hi_steps + 1) // 2  # round the probe time up
        if mid <= lo_steps or mid >= hi_steps:
            break
        result = run_probe(mid)
        if result.converged:
            hi_steps, best = mid, result
        else:
            lo_steps = mid

    minimal_time = hi_steps * dt
    verified = fidelity(propagate(best.pulse, controls), target)
    return MinTimeResult(minimal_time, best.pulse, verified, tuple(probes), iterations, runs)
