"""Benchmark circuit generation: QAOA MAXCUT over random graphs.

The cost layer uses the canonical CX-RZ-CX decomposition of the ZZ
phase and the mixer uses Rx(2 beta); both convention constants sit in
QaoaSpec so compilation comparisons are decomposition-independent.
Parameter indices are (gamma_r, beta_r) -> (2r, 2r+1), which makes
parameter monotonicity hold by construction.
"""
from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Gate, ParamAngle

GRAPH_KINDS = ("3reg", "er")


class BenchError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for a, b in self.edges:
            if a == b or not (0 <= a < self.n and 0 <= b < self.n):
                raise BenchError(f"bad edge ({a},{b}) for {self.n} nodes")
        canonical = tuple(sorted((min(a, b), max(a, b)) for a, b in self.edges))
        if len(set(canonical)) != len(canonical):
            raise BenchError("duplicate edges")
        object.__setattr__(self, "edges", canonical)

    @staticmethod
    def clique(n: int) -> "Graph":
        return Graph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def random_graph(n: int, kind: str, seed: int) -> Graph:
    """Seeded random graph: 3-regular (pairing model) or Erdos-Renyi p=0.5."""
    rng = np.random.default_rng(seed)
    if kind == "er":
        edges = [
            (i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5
        ]
        return Graph(n, tuple(edges))
    if kind != "3reg":
        raise BenchError(f"unknown graph kind {kind!r} (expected one of {GRAPH_KINDS})")
    if n < 4 or n % 2 != 0:
        raise BenchError(f"3-regular graphs need an even node count >= 4, got {n}")
    # Pairing model: match 3 stubs per node, rejecting non-simple samples.
    stubs = np.repeat(np.arange(n), 3)
    for _ in range(10_000):
        rng.shuffle(stubs)
        pairs = {(min(a, b), max(a, b)) for a, b in zip(stubs[0::2], stubs[1::2])}
        if any(a == b for a, b in pairs) or len(pairs) != 3 * n // 2:
            continue
        return Graph(n, tuple((int(a), int(b)) for a, b in sorted(pairs)))
    raise BenchError(f"failed to sample a simple 3-regular graph on {n} nodes")


@dataclass(frozen=True)
class QaoaSpec:
    """Graph, round count p, and the decomposition convention constants."""

    graph: Graph
    p: int
    cost_coefficient: float = 1.0
    mixer_coefficient: float = 2.0

    def __post_init__(self):
        if self.p < 1:
            raise BenchError("QAOA needs at least one round")


def qaoa_circuit(spec: QaoaSpec) -> Circuit:
    """Hadamard layer, then p rounds of cost (per edge) and mixer layers.

    Round r binds gamma_r to parameter 2r and beta_r to 2r+1; the RZ
    angle is cost_coefficient*gamma and the RX angle
    mixer_coefficient*beta.
    """
    n = spec.graph.n
    gates: list[Gate] = [Gate("h", (q,)) for q in range(n)]
    for r in range(spec.p):
        gamma = 2 * r
        beta = 2 * r + 1
        for i, j in spec.graph.edges:
            gates.append(Gate("cx", (i, j)))
            gates.append(Gate("rz", (j,), ParamAngle.affine(gamma, spec.cost_coefficient, 0.0)))
            gates.append(Gate("cx", (i, j)))
        for q in range(n):
            gates.append(Gate("rx", (q,), ParamAngle.affine(beta, spec.mixer_coefficient, 0.0)))
    return Circuit(n, 2 * spec.p, tuple(gates))


def h2_fixture() -> Circuit:
    """Hand-written 2-qubit, 3-parameter ansatz-shaped fixture circuit."""
    from . import qasm_io

    path = importlib.resources.files("vqcpulse") / "fixtures" / "h2_like.vqc"
    return qasm_io.parse(path.read_text(encoding="utf-8"))
