"""Circuit decompositions for the three pulse-compilation strategies.

* ``block_max_width``: greedy aggregation into subcircuits of bounded
  qubit width, the unit a pulse optimizer can handle.
* ``partition_strict``: alternating maximal parameter-free (Fixed)
  subcircuits and single parametrized-rotation blocks; Fixed blocks are
  precompiled once, rotations get closed-form pulses at runtime.
* ``partition_flexible``: maximal contiguous subcircuits depending on
  at most one variational parameter, enabled by parameter monotonicity;
  deeper blocks than strict, compiled at runtime with pre-tuned
  optimizer hyperparameters.

All plans compose: the ordered product of block unitaries (embedded on
the parent register) reproduces the parent circuit's unitary for every
parametrization.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qasm_io
from .circuit import (
    Circuit,
    Gate,
    TABLE_GATE_TIMES,
    asap_schedule,
    bind_parameters,
    build_unitary,
    embed_operator,
)

FIXED = "fixed"
PARAM_GATE = "param_gate"
SINGLE_PARAM = "single_param"
MIXED = "mixed"  # only produced by block_max_width on multi-parameter input

GRAPE_MAX_WIDTH = 4


class PartitionError(ValueError):
    """Raised when a circuit cannot be partitioned as requested."""


@dataclass(frozen=True)
class Block:
    """A contiguous subcircuit on a qubit subset of the parent circuit.

    ``qubits`` maps local indices to parent indices (ascending).  Fixed
    blocks carry no symbolic angles and their subcircuit has zero
    parameters; other tags keep the parent's parameter count so angles
    keep their original indices.
    """

    tag: str
    param_index: int | None
    qubits: tuple[int, ...]
    subcircuit: Circuit

    def __post_init__(self):
        if self.tag not in (FIXED, PARAM_GATE, SINGLE_PARAM, MIXED):
            raise PartitionError(f"unknown block tag {self.tag!r}")
        if (self.param_index is None) != (self.tag in (FIXED, MIXED)):
            raise PartitionError(f"tag {self.tag} inconsistent with param {self.param_index}")
        indices = {
            g.angle.param_index
            for g in self.subcircuit.gates
            if g.angle is not None and g.angle.param_index is not None
        }
        if self.tag == FIXED and indices:
            raise PartitionError("fixed block contains symbolic angles")
        if self.tag == PARAM_GATE and (
            len(self.subcircuit.gates) != 1 or indices != {self.param_index}
        ):
            raise PartitionError("param-gate block must be one parametrized rotation")
        if self.tag == SINGLE_PARAM and not indices <= {self.param_index}:
            raise PartitionError(f"single-param block mixes parameters {indices}")

    @property
    def width(self) -> int:
        return len(self.qubits)

    def text(self) -> str:
        """Canonical serialized form; the block's content identity."""
        return qasm_io.serialize(self.subcircuit)

    def content_hash(self) -> str:
        return hashlib.sha256(self.text().encode()).hexdigest()

    def bound_subcircuit(self, values: Sequence[float]) -> Circuit:
        """Bind the parent parametrization against this block's subcircuit."""
        if self.subcircuit.n_params == 0:
            return self.subcircuit
        return bind_parameters(self.subcircuit, values)

    def unitary(self, values: Sequence[float] = ()) -> np.ndarray:
        return build_unitary(self.bound_subcircuit(values))


@dataclass(frozen=True)
class PartitionPlan:
    blocks: tuple[Block, ...]
    parent: Circuit

    def __len__(self) -> int:
        return len(self.blocks)

    def compose_unitary(self, values: Sequence[float] = ()) -> np.ndarray:
        """Ordered product of embedded block unitaries (later blocks left)."""
        dim = 2**self.parent.n_qubits
        total = np.eye(dim, dtype=complex)
        for block in self.blocks:
            embedded = embed_operator(block.unitary(values), block.qubits, self.parent.n_qubits)
            total = embedded @ total
        return total

    def to_json(self) -> list[dict]:
        return [
            {
                "tag": b.tag,
                "param_index": b.param_index,
                "qubits": list(b.qubits),
                "circuit": b.text(),
                "content_hash": b.content_hash(),
            }
            for b in self.blocks
        ]


def _make_block(parent: Circuit, gates: Sequence[Gate], tag: str, param_index: int | None) -> Block:
    qubits = tuple(sorted({q for g in gates for q in g.qubits}))
    local = {q: i for i, q in enumerate(qubits)}
    relabeled = tuple(
        Gate(g.kind, tuple(local[q] for q in g.qubits), g.angle) for g in gates
    )
    n_params = 0 if tag == FIXED else parent.n_params
    sub = Circuit(len(qubits), n_params, relabeled)
    return Block(tag, param_index, qubits, sub)


def _gate_param(gate: Gate) -> int | None:
    if gate.angle is not None and gate.angle.param_index is not None:
        return gate.angle.param_index
    return None


def _tag_for(gates: Sequence[Gate]) -> tuple[str, int | None]:
    indices = sorted({p for g in gates if (p := _gate_param(g)) is not None})
    if not indices:
        return FIXED, None
    if len(indices) == 1:
        return SINGLE_PARAM, indices[0]
    return MIXED, None


def block_max_width(circuit: Circuit, max_width: int = GRAPE_MAX_WIDTH) -> list[Block]:
    """Greedy width-bounded aggregation in ASAP order.

    A gate joins the current block iff the union of block and gate
    qubits stays within ``max_width``.  Scanning in ASAP order keeps
    every gate after all of its dependency predecessors, so blocks are
    predecessor-closed and the plan composes exactly.
    """
    if max_width < 2:
        raise PartitionError("max_width below two cannot hold two-qubit gates")
    if not circuit.gates:
        return []
    starts, _ = asap_schedule(circuit, [TABLE_GATE_TIMES[g.kind] for g in circuit.gates])
    order = sorted(range(len(circuit.gates)), key=lambda i: (starts[i], i))
    blocks: list[Block] = []
    current: list[Gate] = []
    current_qubits: set[int] = set()
    for idx in order:
        gate = circuit.gates[idx]
        union = current_qubits | set(gate.qubits)
        if current and len(union) > max_width:
            blocks.append(_make_block(circuit, current, *_tag_for(current)))
            current, current_qubits = [gate], set(gate.qubits)
        else:
            current.append(gate)
            current_qubits = union
    blocks.append(_make_block(circuit, current, *_tag_for(current)))
    return blocks


def partition_strict(circuit: Circuit) -> PartitionPlan:
    """Alternating maximal Fixed subcircuits and single parametrized gates.

    Fixed blocks are maximal (never adjacent) and empty Fixed blocks
    between consecutive parametrized gates are omitted.
    """
    blocks: list[Block] = []
    fixed_run: list[Gate] = []
    for gate in circuit.gates:
        param = _gate_param(gate)
        if param is None:
            fixed_run.append(gate)
            continue
        if gate.kind not in ("rz", "rx"):
            raise PartitionError(f"parametrized {gate.kind} is not a supported rotation")
        if fixed_run:
            blocks.append(_make_block(circuit, fixed_run, FIXED, None))
            fixed_run = []
        blocks.append(_make_block(circuit, [gate], PARAM_GATE, param))
    if fixed_run or not blocks:
        blocks.append(_make_block(circuit, fixed_run or circuit.gates, FIXED, None))
    return PartitionPlan(tuple(blocks), circuit)


def check_parameter_monotonicity(circuit: Circuit) -> bool:
    """True iff parametrized gates reference nondecreasing parameter indices.

    Equivalently: all uses of one parameter are consecutive and first
    uses appear in increasing index order, so every parameter's gates
    form one contiguous span of the circuit.
    """
    seq = circuit.param_sequence()
    return all(a <= b for a, b in zip(seq, seq[1:]))


def partition_flexible(circuit: Circuit, max_width: int = GRAPE_MAX_WIDTH) -> PartitionPlan:
    """Maximal contiguous single-parameter subcircuits.

    Parameter-free gates attach to an adjacent parameter run: leading
    gates join the first run, gates between two runs join the earlier
    one, trailing gates join the last.  A circuit with no parametrized
    gates is a single Fixed block.  Blocks wider than ``max_width``
    are re-blocked with the single-parameter tag preserved.
    """
    if not check_parameter_monotonicity(circuit):
        raise PartitionError(
            "parameter indices are not monotonic; fall back to partition_strict"
        )
    if not circuit.gates:
        return PartitionPlan((), circuit)

    params = [_gate_param(g) for g in circuit.gates]
    if all(p is None for p in params):
        block = _make_block(circuit, circuit.gates, FIXED, None)
        return PartitionPlan(_reblock((block,), max_width), circuit)

    # Assign every gate to a parameter run; monotonicity makes runs
    # contiguous, so only the boundaries need choosing.
    run_of: list[int | None] = list(params)
    current = None
    for i, p in enumerate(run_of):  # fixed gates inherit the earlier run
        if p is not None:
            current = p
        elif current is not None:
            run_of[i] = current
    current = None
    for i in range(len(run_of) - 1, -1, -1):  # leading gates join the first run
        if run_of[i] is not None:
            current = run_of[i]
        else:
            run_of[i] = current

    blocks: list[Block] = []
    start = 0
    for i in range(1, len(run_of) + 1):
        if i == len(run_of) or run_of[i] != run_of[start]:
            gates = circuit.gates[start:i]
            blocks.append(_make_block(circuit, gates, SINGLE_PARAM, run_of[start]))
            start = i
    return PartitionPlan(_reblock(tuple(blocks), max_width), circuit)


def _reblock(blocks: tuple[Block, ...], max_width: int) -> tuple[Block, ...]:
    """Split over-wide blocks via block_max_width, preserving tags."""
    out: list[Block] = []
    for block in blocks:
        if block.width <= max_width:
            out.append(block)
            continue
        for sub in block_max_width(block.subcircuit, max_width):
            parent_qubits = tuple(block.qubits[q] for q in sub.qubits)
            out.append(Block(block.tag, block.param_index, parent_qubits, sub.subcircuit))
    return tuple(out)
