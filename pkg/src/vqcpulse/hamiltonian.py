"""Control-Hamiltonian construction for a grid of gmon-style qubits.

Each qubit j carries a charge drive (sigma_x on j) and a flux drive
(|1><1| on j); each coupled pair carries an XX interaction.  The drift
Hamiltonian is zero (rotating frame), so the controls below are the
entire generator set.  Frequencies are expressed in rad/ns, where a
drive quoted as ``2 pi x f GHz`` equals ``2 pi f`` rad/ns.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import MAX_DENSE_WIDTH, embed_operator

#: rad/ns per GHz of drive frequency (GHz * ns = 1).
GHZ_TO_RAD_PER_NS = 2.0 * math.pi

DEFAULT_CHARGE_BOUND = 0.1 * GHZ_TO_RAD_PER_NS
DEFAULT_FLUX_BOUND = 1.5 * GHZ_TO_RAD_PER_NS
DEFAULT_COUPLING_BOUND = 0.05 * GHZ_TO_RAD_PER_NS

_SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_EXCITED = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)


class HamiltonianError(ValueError):
    """Raised for invalid system specifications."""


def grid_edges(rows: int, cols: int) -> tuple[tuple[int, int], ...]:
    """Nearest-neighbor edges of a rows x cols grid, row-major numbering."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            q = r * cols + c
            if c + 1 < cols:
                edges.append((q, q + 1))
            if r + 1 < rows:
                edges.append((q, q + cols))
    return tuple(sorted(edges))


def default_edges(n_qubits: int) -> tuple[tuple[int, int], ...]:
    """Near-square grid for n qubits (e.g. 4 -> 2x2, 6 -> 2x3)."""
    rows = 1
    for r in range(1, int(math.isqrt(n_qubits)) + 1):
        if n_qubits % r == 0:
            rows = r
    return grid_edges(rows, n_qubits // rows)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Qubit count, coupling topology, and per-control amplitude bounds."""

    n_qubits: int
    edges: tuple[tuple[int, int], ...] = ()
    charge_bound: float = DEFAULT_CHARGE_BOUND
    flux_bound: float = DEFAULT_FLUX_BOUND
    coupling_bound: float = DEFAULT_COUPLING_BOUND

    def __post_init__(self):
        if self.n_qubits < 1:
            raise HamiltonianError("need at least one qubit")
        if min(self.charge_bound, self.flux_bound, self.coupling_bound) <= 0:
            raise HamiltonianError("amplitude bounds must be positive")
        canonical = []
        for a, b in self.edges:
            if a == b:
                raise HamiltonianError(f"self-coupling on qubit {a}")
            if not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits):
                raise HamiltonianError(f"edge ({a},{b}) outside 0..{self.n_qubits - 1}")
            canonical.append((min(a, b), max(a, b)))
        if len(set(canonical)) != len(canonical):
            raise HamiltonianError("duplicate coupling edges")
        object.__setattr__(self, "edges", tuple(sorted(canonical)))

    @staticmethod
    def grid(n_qubits: int, **bounds) -> "HamiltonianSpec":
        return HamiltonianSpec(n_qubits, default_edges(n_qubits), **bounds)

    def restricted(self, qubits: tuple[int, ...]) -> "HamiltonianSpec":
        """Induced sub-system on a qubit subset, relabeled 0..k-1."""
        if len(set(qubits)) != len(qubits):
            raise HamiltonianError(f"duplicate qubits in subset {qubits}")
        local = {q: i for i, q in enumerate(qubits)}
        edges = tuple(
            (local[a], local[b]) for a, b in self.edges if a in local and b in local
        )
        return HamiltonianSpec(
            len(qubits), edges, self.charge_bound, self.flux_bound, self.coupling_bound
        )

    def fingerprint(self) -> str:
        """Stable hash of the physical configuration, for cache keys."""
        payload = json.dumps(
            {
                "n": self.n_qubits,
                "edges": self.edges,
                "bounds": [self.charge_bound, self.flux_bound, self.coupling_bound],
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ControlField:
    """One Hermitian generator with its drive-amplitude bound (rad/ns)."""

    label: str
    matrix: np.ndarray = field(repr=False)
    bound: float

    def __post_init__(self):
        if np.max(np.abs(self.matrix - self.matrix.conj().T)) > 1e-12:
            raise HamiltonianError(f"control {self.label} is not Hermitian")
        if self.bound <= 0:
            raise HamiltonianError(f"control {self.label} has non-positive bound")


def build_controls(spec: HamiltonianSpec) -> list[ControlField]:
    """All control fields of the system: charges, fluxes, then couplings.

    Single-qubit fields come first (charge then flux, each ordered by
    qubit), followed by one XX coupling per topology edge.
    """
    if spec.n_qubits > MAX_DENSE_WIDTH:
        raise HamiltonianError(
            f"{spec.n_qubits} qubits exceeds the dense width cap {MAX_DENSE_WIDTH}"
        )
    n = spec.n_qubits
    fields = []
    for j in range(n):
        fields.append(
            ControlField(f"charge[{j}]", embed_operator(_SIGMA_X, (j,), n), spec.charge_bound)
        )
    for j in range(n):
        fields.append(
            ControlField(f"flux[{j}]", embed_operator(_EXCITED, (j,), n), spec.flux_bound)
        )
    xx = np.kron(_SIGMA_X, _SIGMA_X)
    for a, b in spec.edges:
        fields.append(
            ControlField(f"coupling[{a},{b}]", embed_operator(xx, (a, b), n), spec.coupling_bound)
        )
    return fields


def control_labels(spec: HamiltonianSpec) -> list[str]:
    labels = [f"charge[{j}]" for j in range(spec.n_qubits)]
    labels += [f"flux[{j}]" for j in range(spec.n_qubits)]
    labels += [f"coupling[{a},{b}]" for a, b in spec.edges]
    return labels
