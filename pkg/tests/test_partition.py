import numpy as np
import pytest

from vqcpulse import (
    Circuit,
    Gate,
    ParamAngle,
    bind_parameters,
    block_max_width,
    build_unitary,
    check_parameter_monotonicity,
    fidelity,
    partition_flexible,
    partition_strict,
    qaoa_circuit,
)
from vqcpulse.bench import Graph, QaoaSpec
from vqcpulse.circuit import cx, h, random_circuit, rz
from vqcpulse.partition import FIXED, PARAM_GATE, SINGLE_PARAM, PartitionError


def _fig4a_like():
    """Fixed gates interleaved with rotations on params [0, 0, 1, 2]."""
    t = ParamAngle.affine
    gates = (
        h(0),
        cx(0, 1),
        rz(t(0, 1.0), 1),
        h(0),
        rz(t(0, -1.0), 0),
        cx(0, 1),
        rz(t(1, 0.5), 1),
        h(1),
        rz(t(2, 1.0), 0),
    )
    return Circuit(2, 3, gates)


def _parent_gates(block):
    return [
        Gate(g.kind, tuple(block.qubits[q] for q in g.qubits), g.angle)
        for g in block.subcircuit.gates
    ]


def test_strict_alternation_shape():
    plan = partition_strict(_fig4a_like())
    tags = [(b.tag, b.param_index) for b in plan.blocks]
    assert tags == [
        (FIXED, None),
        (PARAM_GATE, 0),
        (FIXED, None),
        (PARAM_GATE, 0),
        (FIXED, None),
        (PARAM_GATE, 1),
        (FIXED, None),
        (PARAM_GATE, 2),
    ]


def test_strict_parameter_free_circuit_is_one_block():
    c = Circuit(2, 0, (h(0), cx(0, 1), rz(0.4, 1)))
    plan = partition_strict(c)
    assert [b.tag for b in plan.blocks] == [FIXED]


def test_strict_omits_empty_fixed_blocks():
    t = ParamAngle.affine
    c = Circuit(1, 2, (rz(t(0, 1.0), 0), rz(t(1, 1.0), 0)))
    plan = partition_strict(c)
    assert [(b.tag, b.param_index) for b in plan.blocks] == [(PARAM_GATE, 0), (PARAM_GATE, 1)]


def test_strict_fixed_blocks_have_no_symbolic_angles():
    plan = partition_strict(_fig4a_like())
    for block in plan.blocks:
        if block.tag == FIXED:
            assert block.subcircuit.n_params == 0
            assert not block.subcircuit.param_sequence()
    tags = [b.tag for b in plan.blocks]
    assert all(a != FIXED or b != FIXED for a, b in zip(tags, tags[1:]))


def test_monotonicity_examples():
    t = ParamAngle.affine
    good = Circuit(1, 4, tuple(rz(t(i, 1.0), 0) for i in (1, 1, 2, 3)))
    bad = Circuit(1, 4, tuple(rz(t(i, 1.0), 0) for i in (1, 2, 3, 1)))
    assert check_parameter_monotonicity(good)
    assert not check_parameter_monotonicity(bad)
    assert check_parameter_monotonicity(Circuit(1, 0, (h(0),)))


def test_flexible_groups_surrounding_fixed_gates():
    plan = partition_flexible(_fig4a_like())
    tags = [(b.tag, b.param_index) for b in plan.blocks]
    assert tags == [(SINGLE_PARAM, 0), (SINGLE_PARAM, 1), (SINGLE_PARAM, 2)]
    # the first block holds both theta_0 rotations plus surrounding fixed gates
    assert len(plan.blocks[0].subcircuit) == 6
    assert len(plan.blocks[1].subcircuit) == 2  # rz(t1) plus the trailing h
    assert len(plan.blocks[2].subcircuit) == 1


def test_flexible_parameter_free_circuit():
    c = Circuit(2, 0, (h(0), cx(0, 1)))
    plan = partition_flexible(c)
    assert [b.tag for b in plan.blocks] == [FIXED]


def test_flexible_blocks_have_at_most_one_parameter():
    plan = partition_flexible(qaoa_circuit(QaoaSpec(Graph.clique(4), 2)))
    for block in plan.blocks:
        distinct = {p for p in block.subcircuit.param_sequence()}
        assert len(distinct) <= 1


def test_flexible_rejects_non_monotonic():
    t = ParamAngle.affine
    c = Circuit(1, 2, (rz(t(1, 1.0), 0), rz(t(0, 1.0), 0)))
    with pytest.raises(PartitionError, match="monotonic"):
        partition_flexible(c)


def test_flexible_qaoa_has_block_per_parameter():
    for p in (1, 2, 3):
        plan = partition_flexible(qaoa_circuit(QaoaSpec(Graph.clique(4), p)))
        seen = {b.param_index for b in plan.blocks if b.tag == SINGLE_PARAM}
        assert seen == set(range(2 * p))


def test_block_max_width_small_circuit_single_block(rng):
    c = random_circuit(rng, 2, 12)
    blocks = block_max_width(c)
    assert len(blocks) == 1
    assert blocks[0].width <= 4


def test_block_max_width_splits_wide_circuits():
    c = qaoa_circuit(QaoaSpec(Graph(6, ((0, 1), (2, 3), (4, 5), (0, 3), (1, 4))), 1))
    blocks = block_max_width(bind_parameters(c, [0.3, 0.7]))
    assert len(blocks) >= 2
    assert all(b.width <= 4 for b in blocks)


def test_block_max_width_empty_circuit():
    assert block_max_width(Circuit.empty(3)) == []


def test_block_max_width_preserves_gates_and_conflict_order(rng):
    for _ in range(30):
        c = random_circuit(rng, 6, 25)
        blocks = block_max_width(c)
        flattened = [g for b in blocks for g in _parent_gates(b)]
        assert sorted(map(repr, flattened)) == sorted(map(repr, c.gates))
        # conflicting gates keep their relative order
        order = {}
        for pos, g in enumerate(flattened):
            order.setdefault(repr((g.kind, g.qubits, g.angle)), []).append(pos)
        positions = []
        for g in c.gates:
            key = repr((g.kind, g.qubits, g.angle))
            positions.append(order[key].pop(0))
        for i, gi in enumerate(c.gates):
            for j in range(i + 1, len(c.gates)):
                if set(gi.qubits) & set(c.gates[j].qubits):
                    assert positions[i] < positions[j]


def test_composition_reproduces_parent_unitary(rng):
    for _ in range(40):
        n = int(rng.integers(2, 5))
        n_params = int(rng.integers(1, 4))
        c = random_circuit(rng, n, int(rng.integers(3, 20)), n_params=n_params)
        theta = rng.uniform(-np.pi, np.pi, size=n_params)
        reference = build_unitary(c, theta)
        for plan in (partition_strict(c), block_and_plan(c)):
            f = fidelity(plan.compose_unitary(theta), reference)
            assert f == pytest.approx(1.0, abs=1e-9)
        if check_parameter_monotonicity(c):
            f = fidelity(partition_flexible(c).compose_unitary(theta), reference)
            assert f == pytest.approx(1.0, abs=1e-9)


def block_and_plan(c):
    from vqcpulse.partition import PartitionPlan

    return PartitionPlan(tuple(block_max_width(c)), c)


def test_flexible_blocks_at_least_as_deep_as_contained_fixed():
    for circuit in (
        _fig4a_like(),
        qaoa_circuit(QaoaSpec(Graph.clique(4), 1)),
        qaoa_circuit(QaoaSpec(Graph.clique(4), 3)),
    ):
        strict_spans = _spans(partition_strict(circuit))
        flex_spans = _spans(partition_flexible(circuit))
        strict_plan = partition_strict(circuit)
        for (fs, fe) in flex_spans:
            for (ss, se), block in zip(strict_spans, strict_plan.blocks):
                if block.tag == FIXED and fs <= ss and se <= fe:
                    assert fe - fs >= se - ss


def _spans(plan):
    spans = []
    pos = 0
    for block in plan.blocks:
        size = len(block.subcircuit)
        spans.append((pos, pos + size))
        pos += size
    return spans


def test_identical_content_blocks_share_hash():
    c = qaoa_circuit(QaoaSpec(Graph.clique(4), 1))
    plan = partition_strict(c)
    fixed = [b for b in plan.blocks if b.tag == FIXED]
    hashes = [b.content_hash() for b in fixed]
    assert len(set(hashes)) < len(hashes)  # cx-pair blocks relabel identically


def test_plan_json_fields():
    plan = partition_strict(_fig4a_like())
    payload = plan.to_json()
    assert len(payload) == len(plan.blocks)
    entry = payload[0]
    assert set(entry) == {"tag", "param_index", "qubits", "circuit", "content_hash"}
    assert entry["circuit"].startswith("qubits")
