"""Gate-level circuits with symbolic rotation parameters.

Gate matrices follow the usual conventions::

    U3(t, p, l) = [[cos(t/2),           -e^{il} sin(t/2)],
                   [e^{ip} sin(t/2),  e^{i(p+l)} cos(t/2)]]
    U1(l) = U3(0, 0, l),  U2(p, l) = U3(pi/2, p, l)
    RZ(t) = exp(-i t Z / 2), PauliEvolution(P, t) = exp(-i t P / 2)

For multi-qubit gates the first operand is the least-significant bit of the
local matrix index, matching the global qubit-0-is-LSB convention. CNOT
operands are ``(control, target)``.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .errors import UnboundParameter, WidthMismatch
from .pauli import PauliString

NATIVE = ("U1", "U2", "U3", "CNOT")

ARITY = {
    "U1": 1, "U2": 1, "U3": 1, "RX": 1, "RY": 1, "RZ": 1,
    "X": 1, "H": 1, "CNOT": 2, "SWAP": 2,
}
N_PARAMS = {
    "U1": 1, "U2": 2, "U3": 3, "RX": 1, "RY": 1, "RZ": 1,
    "X": 0, "H": 0, "CNOT": 0, "SWAP": 0, "PauliEvolution": 1,
}
# gates of the form exp(-i angle G / 2) with G**2 = I (up to a global phase)
ROTATIONS = ("RX", "RY", "RZ", "U1", "PauliEvolution")


@dataclass(frozen=True)
class Param:
    """Symbolic slot: resolves to ``scale * values[index]``."""

    index: int
    scale: float = 1.0

    def resolve(self, values: Sequence[float]) -> float:
        try:
            return self.scale * float(values[self.index])
        except IndexError:
            raise UnboundParameter(f"parameter {self.index} is not bound") from None


Angle = Union[float, Param]


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    params: tuple[Angle, ...] = ()
    pauli: PauliString | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.kind == "PauliEvolution":
            if self.pauli is None:
                raise ValueError("PauliEvolution needs a Pauli string")
            if self.qubits != self.pauli.support:
                raise ValueError("PauliEvolution operands must equal the string's support")
        elif self.kind not in ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        elif len(self.qubits) != ARITY[self.kind]:
            raise ValueError(f"{self.kind} acts on {ARITY[self.kind]} qubits, got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated operand in {self.kind}{self.qubits}")
        if len(self.params) != N_PARAMS[self.kind]:
            raise ValueError(f"{self.kind} takes {N_PARAMS[self.kind]} parameters")

    @property
    def is_parametric(self) -> bool:
        return any(isinstance(p, Param) for p in self.params)

    def angles(self, values: Sequence[float] = ()) -> tuple[float, ...]:
        return tuple(p.resolve(values) if isinstance(p, Param) else float(p) for p in self.params)

    def bound(self, values: Sequence[float]) -> Gate:
        return replace(self, params=self.angles(values))

    def matrix(self, values: Sequence[float] = ()) -> np.ndarray:
        return gate_matrix(self.kind, self.angles(values), self.pauli)

    def to_dict(self) -> dict:
        params = [
            {"param": p.index, "scale": p.scale} if isinstance(p, Param) else p for p in self.params
        ]
        out = {"kind": self.kind, "qubits": list(self.qubits), "params": params}
        if self.pauli is not None:
            out["pauli"] = str(self.pauli)
        return out


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=complex,
    )


_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_SINGLE = {"X": _X, "Y": _Y, "Z": _Z}
_CNOT = np.eye(4, dtype=complex)[[0, 3, 2, 1]]
_SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]


def pauli_matrix_local(string: PauliString) -> np.ndarray:
    """Matrix of ``string`` on its own support (first support qubit = LSB)."""
    mat = np.ones((1, 1), dtype=complex)
    for _, axis in string.factors:
        mat = np.kron(_SINGLE[axis], mat)
    return mat


def gate_matrix(kind: str, angles: Sequence[float], pauli: PauliString | None = None) -> np.ndarray:
    if kind == "U3":
        return u3_matrix(*angles)
    if kind == "U2":
        return u3_matrix(math.pi / 2, *angles)
    if kind == "U1":
        return np.diag([1.0, np.exp(1j * angles[0])]).astype(complex)
    if kind in ("RX", "RY", "RZ"):
        t = angles[0]
        sigma = _SINGLE[kind[1]]
        return math.cos(t / 2) * np.eye(2) - 1j * math.sin(t / 2) * sigma
    if kind == "X":
        return _X.copy()
    if kind == "H":
        return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    if kind == "CNOT":
        return _CNOT.copy()
    if kind == "SWAP":
        return _SWAP.copy()
    if kind == "PauliEvolution":
        p = pauli_matrix_local(pauli)
        t = angles[0]
        return math.cos(t / 2) * np.eye(p.shape[0]) - 1j * math.sin(t / 2) * p
    raise ValueError(f"unknown gate kind {kind!r}")


@dataclass
class Circuit:
    n_qubits: int
    gates: list[Gate] = field(default_factory=list)
    parameters: list[str] = field(default_factory=list)

    @property
    def num_parameters(self) -> int:
        return len(self.parameters)

    def add_parameter(self, name: str) -> Param:
        self.parameters.append(name)
        return Param(len(self.parameters) - 1)

    def append(self, gate: Gate) -> Circuit:
        for q in gate.qubits:
            if not 0 <= q < self.n_qubits:
                raise WidthMismatch(f"gate {gate.kind} on qubit {q} outside {self.n_qubits}-qubit circuit")
        for p in gate.params:
            if isinstance(p, Param) and not 0 <= p.index < len(self.parameters):
                raise UnboundParameter(f"gate refers to undeclared parameter {p.index}")
        self.gates.append(gate)
        return self

    def extend(self, gates) -> Circuit:
        for g in gates:
            self.append(g)
        return self

    # builder shorthands
    def x(self, q):
        return self.append(Gate("X", (q,)))

    def h(self, q):
        return self.append(Gate("H", (q,)))

    def cnot(self, control, target):
        return self.append(Gate("CNOT", (control, target)))

    def swap(self, a, b):
        return self.append(Gate("SWAP", (a, b)))

    def rx(self, angle, q):
        return self.append(Gate("RX", (q,), (angle,)))

    def ry(self, angle, q):
        return self.append(Gate("RY", (q,), (angle,)))

    def rz(self, angle, q):
        return self.append(Gate("RZ", (q,), (angle,)))

    def u1(self, lam, q):
        return self.append(Gate("U1", (q,), (lam,)))

    def u2(self, phi, lam, q):
        return self.append(Gate("U2", (q,), (phi, lam)))

    def u3(self, theta, phi, lam, q):
        return self.append(Gate("U3", (q,), (theta, phi, lam)))

    def pauli_evolution(self, string: PauliString, angle):
        return self.append(Gate("PauliEvolution", string.support, (angle,), string))

    def copy(self) -> Circuit:
        return Circuit(self.n_qubits, list(self.gates), list(self.parameters))

    def bind(self, values: Sequence[float]) -> Circuit:
        if len(values) < self.num_parameters:
            raise UnboundParameter(
                f"circuit has {self.num_parameters} parameters, {len(values)} values given"
            )
        return Circuit(self.n_qubits, [g.bound(values) for g in self.gates], [])

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "parameters": list(self.parameters),
            "gates": [g.to_dict() for g in self.gates],
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def __len__(self) -> int:
        return len(self.gates)


# --- transpilation -----------------------------------------------------------

_HALF_PI = math.pi / 2


def _scaled(angle: Angle, factor: float) -> Angle:
    if isinstance(angle, Param):
        return Param(angle.index, angle.scale * factor)
    return angle * factor


def pauli_evolution_gates(string: PauliString, angle: Angle) -> list[Gate]:
    """CNOT-staircase synthesis of ``exp(-i angle P / 2)`` in the native set."""
    pre, post = [], []
    for q, axis in string.factors:
        if axis == "X":
            pre.append(Gate("U2", (q,), (0.0, math.pi)))
            post.append(Gate("U2", (q,), (0.0, math.pi)))
        elif axis == "Y":
            # S^dag then H maps Y to Z; undone by H then S
            pre += [Gate("U1", (q,), (-_HALF_PI,)), Gate("U2", (q,), (0.0, math.pi))]
            post += [Gate("U2", (q,), (0.0, math.pi)), Gate("U1", (q,), (_HALF_PI,))]
    support = string.support
    ladder = [Gate("CNOT", (a, b)) for a, b in zip(support, support[1:])]
    # U1 differs from RZ by a global phase only
    core = [Gate("U1", (support[-1],), (angle,))]
    return pre + ladder + core + ladder[::-1] + post


def _to_native(gate: Gate) -> list[Gate]:
    k = gate.kind
    if k in NATIVE:
        return [gate]
    q = gate.qubits
    if k == "RZ":
        return [Gate("U1", q, gate.params)]
    if k == "RY":
        return [Gate("U3", q, (gate.params[0], 0.0, 0.0))]
    if k == "RX":
        return [Gate("U3", q, (gate.params[0], -_HALF_PI, _HALF_PI))]
    if k == "X":
        return [Gate("U3", q, (math.pi, 0.0, math.pi))]
    if k == "H":
        return [Gate("U2", q, (0.0, math.pi))]
    if k == "SWAP":
        a, b = q
        return [Gate("CNOT", (a, b)), Gate("CNOT", (b, a)), Gate("CNOT", (a, b))]
    if k == "PauliEvolution":
        return pauli_evolution_gates(gate.pauli, gate.params[0])
    raise ValueError(f"cannot transpile {k}")


def _is_h(g: Gate) -> bool:
    return g.kind == "U2" and not g.is_parametric and np.allclose(g.params, (0.0, math.pi))


def _cancels(a: Gate, b: Gate) -> bool:
    if a.qubits != b.qubits:
        return False
    if a.kind == "CNOT" and b.kind == "CNOT":
        return True
    if _is_h(a) and _is_h(b):
        return True
    if a.kind == "U1" and b.kind == "U1" and not (a.is_parametric or b.is_parametric):
        return abs(math.remainder(a.params[0] + b.params[0], 2 * math.pi)) < 1e-12
    return False


def _peephole(gates: list[Gate]) -> list[Gate]:
    """Cancel adjacent inverse pairs (CNOT-CNOT, H-H, U1 pairs summing to 0)."""
    out: list[Gate | None] = []
    stacks: dict[int, list[int]] = defaultdict(list)
    for g in gates:
        tops = {stacks[q][-1] if stacks[q] else None for q in g.qubits}
        if len(tops) == 1:
            (i,) = tops
            if i is not None and _cancels(out[i], g):
                out[i] = None
                for q in g.qubits:
                    stacks[q].pop()
                continue
        out.append(g)
        for q in g.qubits:
            stacks[q].append(len(out) - 1)
    return [g for g in out if g is not None]


def transpile(circuit: Circuit, optimize: bool = True) -> Circuit:
    """Rewrite into the native set {U1, U2, U3, CNOT}.

    Equivalent up to a global phase. With ``optimize`` adjacent inverse pairs
    are cancelled.
    """
    gates: list[Gate] = []
    for g in circuit.gates:
        gates.extend(_to_native(g))
    if optimize:
        gates = _peephole(gates)
    return Circuit(circuit.n_qubits, gates, list(circuit.parameters))


PAPER_GATE_COUNTS = {"U2": 288, "CNOT": 280, "U1": 184, "U": 4}


def count_gates(circuit: Circuit, optimize: bool = True) -> dict[str, int]:
    """Tally by kind after transpiling to the native set."""
    native = transpile(circuit, optimize=optimize)
    return dict(sorted(Counter(g.kind for g in native.gates).items()))


def compare_gate_counts(counts: dict[str, int]) -> list[tuple[str, int, int]]:
    """Rows ``(kind, ours, reference)``; the reference's "U" is our U3."""
    rows = []
    for kind, ref in PAPER_GATE_COUNTS.items():
        ours = counts.get("U3" if kind == "U" else kind, 0)
        rows.append((kind, ours, ref))
    return rows
