"""Binary search for the shortest pulse realizing a gate.

The flux drive is 15x stronger than the charge drive on this system, so
Z rotations compress to a fraction of a nanosecond while X rotations
are pinned at their amplitude-bound speed limit.  The probe log shows
the bisection at work.
"""
import numpy as np

from vqcpulse import GrapeConfig, HamiltonianSpec, gate_matrix, minimal_pulse_time

spec = HamiltonianSpec(1)
config = GrapeConfig(learning_rate=0.05, decay_rate=0.999, max_iterations=1200, rng_seed=3)

for name, target, baseline in (
    ("Rz(pi)", gate_matrix("rz", np.pi), 0.4),
    ("Rx(pi)", gate_matrix("rx", np.pi), 2.5),
):
    result = minimal_pulse_time(target, spec, config, baseline_runtime=baseline)
    print(f"{name}: minimal time {result.minimal_time:.2f} ns, fidelity {result.fidelity:.5f}")
    for t, ok in result.probes:
        print(f"   probe {t:5.2f} ns -> {'feasible' if ok else 'infeasible'}")

# The analytic floor for Rz(pi) is pi / flux_bound ~ 0.33 ns; for Rx(pi)
# the charge bound pins the floor at exactly 2.5 ns.
print(f"Rz analytic floor: {np.pi / spec.flux_bound:.3f} ns")
print(f"Rx analytic floor: {np.pi / 2 / spec.charge_bound:.3f} ns")
