"""The two partial-compilation decompositions, side by side.

Strict partitioning alternates parameter-free blocks with single
parametrized rotations; flexible partitioning groups everything that
depends on one parameter into a single deep block.  Both compose back
to the original circuit exactly.
"""
import numpy as np

from vqcpulse import (
    build_unitary,
    check_parameter_monotonicity,
    fidelity,
    h2_fixture,
    partition_flexible,
    partition_strict,
    qaoa_circuit,
)
from vqcpulse.bench import Graph, QaoaSpec


def describe(plan, title):
    print(f"{title}: {len(plan.blocks)} blocks")
    for block in plan.blocks:
        param = "-" if block.param_index is None else f"t[{block.param_index}]"
        print(
            f"   {block.tag:<12} param {param:<5} qubits {block.qubits}"
            f"  gates {len(block.subcircuit)}"
        )


for name, circuit in (
    ("H2-shaped fixture", h2_fixture()),
    ("QAOA on the 4-clique, p=1", qaoa_circuit(QaoaSpec(Graph.clique(4), 1))),
):
    print(f"=== {name} ===")
    print(f"parameter monotonicity: {check_parameter_monotonicity(circuit)}")
    strict = partition_strict(circuit)
    flexible = partition_flexible(circuit)
    describe(strict, "strict")
    describe(flexible, "flexible")

    theta = np.random.default_rng(1).uniform(0, 2 * np.pi, size=circuit.n_params)
    reference = build_unitary(circuit, theta)
    for label, plan in (("strict", strict), ("flexible", flexible)):
        f = fidelity(plan.compose_unitary(theta), reference)
        print(f"{label} composition fidelity: {f:.12f}")
    print()
