"""Parametrized quantum circuit IR: gates, unitaries, and scheduling.

Angles are either constants or affine functions of one variational
parameter, which is what makes the partial-compilation passes possible:
every pass in this package only ever needs to know *which* parameter a
gate depends on, never the parameter's value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

GATE_KINDS = ("rz", "rx", "h", "cx", "swap")
ROTATION_KINDS = ("rz", "rx")

#: Pulse durations (ns) of the lookup-table gate set on the reference
#: gmon system.  Used as scheduling weights and as search baselines.
TABLE_GATE_TIMES: Mapping[str, float] = {
    "rz": 0.4,
    "rx": 2.5,
    "h": 1.4,
    "cx": 3.8,
    "swap": 7.4,
}

#: Hard cap on dense-unitary construction (2^6 x 2^6 is still desk scale).
MAX_DENSE_WIDTH = 6


class CircuitError(ValueError):
    """Raised for malformed circuits, gates, or parametrizations."""


@dataclass(frozen=True)
class ParamAngle:
    """An angle that is constant or affine in one variational parameter.

    ``param_index is None`` means the angle is the constant ``offset``.
    Otherwise the angle is ``coefficient * theta[param_index] + offset``
    with a nonzero coefficient (a zero coefficient is normalized away by
    :meth:`affine`).
    """

    param_index: int | None
    coefficient: float
    offset: float

    @staticmethod
    def constant(value: float) -> "ParamAngle":
        return ParamAngle(None, 0.0, float(value))

    @staticmethod
    def affine(param_index: int, coefficient: float, offset: float = 0.0) -> "ParamAngle":
        if coefficient == 0.0:
            return ParamAngle.constant(offset)
        if param_index < 0:
            raise CircuitError(f"negative parameter index {param_index}")
        return ParamAngle(int(param_index), float(coefficient), float(offset))

    @property
    def is_constant(self) -> bool:
        return self.param_index is None

    def evaluate(self, values: Sequence[float]) -> float:
        if self.param_index is None:
            return self.offset
        return self.coefficient * values[self.param_index] + self.offset


@dataclass(frozen=True)
class Gate:
    """A single gate application; ``angle`` is present iff kind is rz/rx."""

    kind: str
    qubits: tuple[int, ...]
    angle: ParamAngle | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        n_args = 1 if self.kind in ("rz", "rx", "h") else 2
        if len(self.qubits) != n_args:
            raise CircuitError(f"{self.kind} takes {n_args} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"duplicate qubits in {self.kind}{self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise CircuitError(f"negative qubit index in {self.qubits}")
        if self.kind in ROTATION_KINDS:
            if self.angle is None:
                raise CircuitError(f"{self.kind} requires an angle")
        elif self.angle is not None:
            raise CircuitError(f"{self.kind} carries no angle")


def rz(angle: ParamAngle | float, qubit: int) -> Gate:
    angle = angle if isinstance(angle, ParamAngle) else ParamAngle.constant(angle)
    return Gate("rz", (qubit,), angle)


def rx(angle: ParamAngle | float, qubit: int) -> Gate:
    angle = angle if isinstance(angle, ParamAngle) else ParamAngle.constant(angle)
    return Gate("rx", (qubit,), angle)


def h(qubit: int) -> Gate:
    return Gate("h", (qubit,))


def cx(control: int, target: int) -> Gate:
    return Gate("cx", (control, target))


def swap(a: int, b: int) -> Gate:
    return Gate("swap", (a, b))


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over ``n_qubits`` with ``n_params`` free parameters."""

    n_qubits: int
    n_params: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        if self.n_qubits < 0 or self.n_params < 0:
            raise CircuitError("negative circuit dimensions")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if any(q >= self.n_qubits for q in g.qubits):
                raise CircuitError(f"gate {g.kind}{g.qubits} exceeds width {self.n_qubits}")
            if g.angle is not None and g.angle.param_index is not None:
                if g.angle.param_index >= self.n_params:
                    raise CircuitError(
                        f"parameter index {g.angle.param_index} >= param count {self.n_params}"
                    )

    @staticmethod
    def empty(n_qubits: int, n_params: int = 0) -> "Circuit":
        return Circuit(n_qubits, n_params, ())

    def __len__(self) -> int:
        return len(self.gates)

    def param_sequence(self) -> list[int]:
        """Parameter indices of parametrized gates, in gate order."""
        return [
            g.angle.param_index
            for g in self.gates
            if g.angle is not None and g.angle.param_index is not None
        ]


def gate_matrix(kind: str, angle: float | None = None) -> np.ndarray:
    """Unitary matrix for a gate with a bound (constant) angle.

    Rotation conventions follow the reference gate set exactly:
    Rx(theta) = [[i cos(t/2), sin(t/2)], [sin(t/2), i cos(t/2)]] and
    Rz(phi) = diag(1, e^{i phi}).  Both differ from the textbook
    matrices by a global phase only, which the trace-fidelity metric
    ignores.
    """
    if kind in ROTATION_KINDS:
        if angle is None:
            raise CircuitError(f"unbound parameter: {kind} needs a constant angle")
        if kind == "rx":
            c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
            return np.array([[1j * c, s], [s, 1j * c]], dtype=complex)
        return np.array([[1.0, 0.0], [0.0, np.exp(1j * angle)]], dtype=complex)
    if angle is not None:
        raise CircuitError(f"{kind} carries no angle")
    if kind == "h":
        return np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)
    if kind == "cx":
        return np.array(
            [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
        )
    if kind == "swap":
        return np.array(
            [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
        )
    raise CircuitError(f"unknown gate kind {kind!r}")


def embed_operator(op: np.ndarray, qubits: Sequence[int], n_qubits: int) -> np.ndarray:
    """Embed a k-qubit operator acting on ``qubits`` into an n-qubit register.

    Qubit 0 is the most significant tensor factor, matching the basis
    ordering |q0 q1 ... q_{n-1}>.
    """
    k = len(qubits)
    if op.shape != (2**k, 2**k):
        raise CircuitError(f"operator shape {op.shape} does not match {k} qubits")
    if len(set(qubits)) != k or any(q < 0 or q >= n_qubits for q in qubits):
        raise CircuitError(f"bad qubit subset {qubits} for width {n_qubits}")
    if n_qubits > MAX_DENSE_WIDTH:
        raise CircuitError(f"width {n_qubits} exceeds dense cap {MAX_DENSE_WIDTH}")
    rest = [q for q in range(n_qubits) if q not in qubits]
    full = np.kron(op, np.eye(2 ** len(rest), dtype=complex))
    # The kron above acts on axis order (qubits..., rest...); permute back.
    order = list(qubits) + rest
    tensor = full.reshape((2,) * (2 * n_qubits))
    perm = [order.index(q) for q in range(n_qubits)]
    tensor = np.transpose(tensor, perm + [n_qubits + p for p in perm])
    return np.ascontiguousarray(tensor.reshape(2**n_qubits, 2**n_qubits))


def bind_parameters(circuit: Circuit, values: Sequence[float]) -> Circuit:
    """Resolve every affine angle against ``values``; result has n_params = 0."""
    if len(values) != circuit.n_params:
        raise CircuitError(
            f"parametrization length {len(values)} != param count {circuit.n_params}"
        )
    gates = []
    for g in circuit.gates:
        if g.angle is not None and not g.angle.is_constant:
            gates.append(replace(g, angle=ParamAngle.constant(g.angle.evaluate(values))))
        else:
            gates.append(g)
    return Circuit(circuit.n_qubits, 0, tuple(gates))


def build_unitary(
    circuit: Circuit,
    values: Sequence[float] = (),
    max_width: int = MAX_DENSE_WIDTH,
) -> np.ndarray:
    """Dense unitary of the circuit: gates left-multiply in program order."""
    if circuit.n_qubits > max_width:
        raise CircuitError(
            f"width {circuit.n_qubits} exceeds dense-unitary cap {max_width}"
        )
    if circuit.n_params:
        circuit = bind_parameters(circuit, values)
    elif len(values) not in (0, circuit.n_params):
        raise CircuitError(f"unexpected parametrization of length {len(values)}")
    dim = 2**circuit.n_qubits
    u = np.eye(dim, dtype=complex)
    for g in circuit.gates:
        angle = g.angle.offset if g.angle is not None else None
        u = embed_operator(gate_matrix(g.kind, angle), g.qubits, circuit.n_qubits) @ u
    return u


def _merge_angles(a: ParamAngle, b: ParamAngle) -> ParamAngle | None:
    """Sum of two angles if representable, else None (not mergeable)."""
    if a.is_constant and b.is_constant:
        return ParamAngle.constant(a.offset + b.offset)
    if a.is_constant:
        return ParamAngle.affine(b.param_index, b.coefficient, b.offset + a.offset)
    if b.is_constant:
        return ParamAngle.affine(a.param_index, a.coefficient, a.offset + b.offset)
    if a.param_index == b.param_index:
        return ParamAngle.affine(
            a.param_index, a.coefficient + b.coefficient, a.offset + b.offset
        )
    return None


def merge_rotations(circuit: Circuit) -> Circuit:
    """Combine adjacent same-axis rotations on the same qubit.

    Adjacent means no intervening gate touches the qubit.  Works on
    symbolic angles: affine angles merge when they reference the same
    parameter, and constants fold into an affine offset.  The circuit
    unitary is preserved up to global phase for every parametrization.
    """
    out: list[Gate] = []
    last_on_qubit: dict[int, int] = {}  # qubit -> index in `out` of last gate touching it
    for g in circuit.gates:
        if g.kind in ROTATION_KINDS:
            q = g.qubits[0]
            prev_idx = last_on_qubit.get(q)
            if prev_idx is not None:
                prev = out[prev_idx]
                if prev.kind == g.kind and prev.qubits == g.qubits:
                    merged = _merge_angles(prev.angle, g.angle)
                    if merged is not None:
                        out[prev_idx] = replace(prev, angle=merged)
                        continue
        idx = len(out)
        out.append(g)
        for q in g.qubits:
            last_on_qubit[q] = idx
    return Circuit(circuit.n_qubits, circuit.n_params, tuple(out))


def asap_schedule(circuit: Circuit, durations: Sequence[float]) -> tuple[list[float], float]:
    """ASAP start times under the conservative dependency model.

    Two gates conflict iff they share a qubit; no commutation analysis.
    Returns (start_times, total_runtime).  Equivalent to the longest
    path through the dependency DAG because every gate starts exactly
    when its last predecessor finishes.
    """
    if len(durations) != len(circuit.gates):
        raise CircuitError("one duration per gate required")
    free_at = [0.0] * circuit.n_qubits
    starts = []
    total = 0.0
    for g, d in zip(circuit.gates, durations):
        if d < 0:
            raise CircuitError("negative gate duration")
        start = max((free_at[q] for q in g.qubits), default=0.0)
        starts.append(start)
        for q in g.qubits:
            free_at[q] = start + d
        total = max(total, start + d)
    return starts, total


def critical_path_runtime(
    circuit: Circuit, gate_times: Mapping[str, float] = TABLE_GATE_TIMES
) -> float:
    """Length (ns) of the critical path, weighted by per-kind durations."""
    try:
        durations = [gate_times[g.kind] for g in circuit.gates]
    except KeyError as exc:
        raise CircuitError(f"no duration for gate kind {exc.args[0]!r}") from exc
    return asap_schedule(circuit, durations)[1]


def random_circuit(
    rng: np.random.Generator,
    n_qubits: int,
    n_gates: int,
    n_params: int = 0,
    two_qubit_fraction: float = 0.3,
) -> Circuit:
    """Random test circuit; parametrized rotations appear when n_params > 0."""
    gates: list[Gate] = []
    for _ in range(n_gates):
        if n_qubits >= 2 and rng.random() < two_qubit_fraction:
            a, b = rng.choice(n_qubits, size=2, replace=False)
            gates.append(Gate("cx" if rng.random() < 0.7 else "swap", (int(a), int(b))))
            continue
        q = int(rng.integers(n_qubits))
        kind = GATE_KINDS[rng.integers(3)]
        if kind == "h":
            gates.append(h(q))
        else:
            if n_params and rng.random() < 0.5:
                angle = ParamAngle.affine(
                    int(rng.integers(n_params)),
                    float(rng.choice([-1.0, 0.5, 1.0, 2.0])),
                    float(rng.uniform(-np.pi, np.pi)) if rng.random() < 0.5 else 0.0,
                )
            else:
                angle = ParamAngle.constant(float(rng.uniform(-np.pi, np.pi)))
            gates.append(Gate(kind, (q,), angle))
    return Circuit(n_qubits, n_params, tuple(gates))
