"""Tour of the circuit IR and the .vqc text format.

Builds a small parametrized circuit, round-trips it through the text
format, folds adjacent rotations, and prices the critical path against
the reference gate-duration table.
"""
import numpy as np

from vqcpulse import (
    Circuit,
    ParamAngle,
    bind_parameters,
    build_unitary,
    critical_path_runtime,
    merge_rotations,
    parse,
    serialize,
)
from vqcpulse.circuit import cx, h, rz

# A two-qubit circuit with one variational parameter used twice.
theta = ParamAngle.affine(0, 0.5)  # angle = 0.5 * t[0]
circuit = Circuit(2, 1, (h(0), cx(0, 1), rz(theta, 1), rz(theta, 1), cx(0, 1)))

print("serialized form:")
print(serialize(circuit))

# The two rz(0.5*t[0]) gates are adjacent on qubit 1, so they fold into
# a single rz(1.0*t[0]) without changing the circuit's unitary.
merged = merge_rotations(circuit)
print(f"gates before/after rotation merging: {len(circuit)} -> {len(merged)}")
print(serialize(merged))

values = [np.pi / 2]
u_original = build_unitary(circuit, values)
u_merged = build_unitary(merged, values)
overlap = abs(np.trace(u_original.conj().T @ u_merged)) / 4
print(f"unitary overlap after merging: {overlap:.12f}")

bound = bind_parameters(merged, values)
print("bound circuit:")
print(serialize(bound))

print(f"critical path (table durations): {critical_path_runtime(merged):.2f} ns")

# Round-trip guarantee: parsing the serialized text reproduces the circuit.
assert parse(serialize(circuit)) == circuit
print("round-trip: parse(serialize(c)) == c")
