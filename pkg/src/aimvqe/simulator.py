"""Statevector and density-matrix execution, shot sampling.

Amplitudes are indexed with qubit 0 as the least-significant bit. A density
matrix ``rho[r, c]`` is handled as a vector over ``2n`` virtual qubits: column
bit ``q`` is virtual qubit ``q`` and row bit ``q`` is virtual qubit ``n + q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate, Param, transpile
from .errors import InvalidChannel, TooWide, WidthMismatch
from .noise import KrausChannel, NoiseModel
from .pauli import CompiledOperator, PauliString, QubitOperator, pauli_action
from .states import DensityMatrix, StateVector, as_array

DENSITY_LIMIT = 10

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_SDG = np.diag([1.0, -1j])


def apply_matrix(vec: np.ndarray, mat: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Apply a local ``2**k`` matrix (first operand = local LSB) to ``vec``.

    Extra trailing axes of ``vec`` are treated as a batch.
    """
    k = len(qubits)
    batch = vec.shape[1:]
    tensor = vec.reshape((2,) * n + batch)
    # tensor axis 0 is the most significant qubit
    axes = [n - 1 - q for q in reversed(qubits)]
    out = np.tensordot(mat.reshape((2,) * (2 * k)), tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes).reshape((1 << n,) + batch)


def _apply_gate(psi: np.ndarray, gate: Gate, values: Sequence[float], n: int) -> np.ndarray:
    if gate.kind == "PauliEvolution":
        (angle,) = gate.angles(values)
        src, phase = pauli_action(gate.pauli, n)
        return math.cos(angle / 2) * psi - 1j * math.sin(angle / 2) * phase * psi[src]
    if gate.kind == "X":
        return psi[np.arange(psi.shape[0]) ^ (1 << gate.qubits[0])]
    return apply_matrix(psi, gate.matrix(values), gate.qubits, n)


def _check_width(circuit: Circuit, n: int):
    if n != circuit.n_qubits:
        raise WidthMismatch(f"state has {n} qubits, circuit has {circuit.n_qubits}")


def run_statevector(
    circuit: Circuit, bindings: Sequence[float] = (), initial: StateVector | None = None
) -> StateVector:
    """Apply the gates in order, starting from ``|0...0>`` unless ``initial`` is given."""
    n = circuit.n_qubits
    psi = StateVector.zero(n).data if initial is None else np.array(as_array(initial), dtype=complex)
    _check_width(circuit, psi.shape[0].bit_length() - 1)
    values = list(bindings)
    for g in circuit.gates:
        psi = _apply_gate(psi, g, values, n)
    return StateVector(psi)


# --- density backend ---------------------------------------------------------


def _apply_unitary_rho(vec: np.ndarray, mat: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    vec = apply_matrix(vec, mat, [n + q for q in qubits], 2 * n)
    return apply_matrix(vec, mat.conj(), qubits, 2 * n)


def _apply_channel_rho(vec: np.ndarray, channel: KrausChannel, qubits: Sequence[int], n: int) -> np.ndarray:
    sup = _superop(channel)
    return apply_matrix(vec, sup, list(qubits) + [n + q for q in qubits], 2 * n)


_SUPEROP_CACHE: dict[int, tuple[KrausChannel, np.ndarray]] = {}


def _superop(channel: KrausChannel) -> np.ndarray:
    # local index = column bits (low) then row bits (high): sum_K kron(K, conj K)
    hit = _SUPEROP_CACHE.get(id(channel))
    if hit is not None and hit[0] is channel:
        return hit[1]
    if not channel.is_cptp():
        raise InvalidChannel(f"channel violates completeness by {channel.completeness_error():.3e}")
    sup = channel.superoperator()
    if len(_SUPEROP_CACHE) > 4096:
        _SUPEROP_CACHE.clear()
    _SUPEROP_CACHE[id(channel)] = (channel, sup)
    return sup


def apply_channel(rho: DensityMatrix, channel: KrausChannel, qubits: Sequence[int]) -> DensityMatrix:
    data = as_array(rho)
    n = data.shape[0].bit_length() - 1
    if channel.num_qubits != len(qubits):
        raise InvalidChannel(f"{channel.num_qubits}-qubit channel given {len(qubits)} operands")
    return DensityMatrix(_apply_channel_rho(data.reshape(-1), channel, qubits, n).reshape(data.shape))


def run_density(
    circuit: Circuit,
    bindings: Sequence[float] = (),
    noise: NoiseModel | None = None,
    initial: DensityMatrix | None = None,
    lower: bool = True,
) -> DensityMatrix:
    """Mixed-state execution.

    With a noise model the circuit is first lowered to the native set (skip
    with ``lower=False`` for circuits already lowered), so gate durations
    refer to U1/U2/U3/CNOT; channels follow each gate on the targeted
    operands.
    """
    n = circuit.n_qubits
    if n > DENSITY_LIMIT:
        raise TooWide(f"density backend is limited to {DENSITY_LIMIT} qubits, got {n}")
    rho = DensityMatrix.zero(n).data if initial is None else np.array(as_array(initial), dtype=complex)
    _check_width(circuit, rho.shape[0].bit_length() - 1)
    gates = transpile(circuit).gates if noise is not None and lower else circuit.gates
    values = list(bindings)
    vec = rho.reshape(-1)
    for g in gates:
        vec = _apply_unitary_rho(vec, g.matrix(values), g.qubits, n)
        if noise is not None:
            for qubits, channel in noise.channels_for(g.kind, g.qubits):
                vec = _apply_channel_rho(vec, channel, qubits, n)
    return DensityMatrix(vec.reshape(1 << n, 1 << n))


# --- sampling ----------------------------------------------------------------


def sample_counts(state, shots: int, seed: int) -> dict[str, int]:
    """Computational-basis histogram; bitstrings print qubit ``n-1`` leftmost."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if isinstance(state, DensityMatrix) or as_array(state).ndim == 2:
        probs = np.clip(np.real(np.diag(as_array(state))), 0.0, None)
    else:
        probs = np.abs(as_array(state)) ** 2
    probs = probs / probs.sum()
    n = probs.shape[0].bit_length() - 1
    counts = np.random.default_rng(seed).multinomial(shots, probs)
    return {format(i, f"0{n}b"): int(c) for i, c in enumerate(counts) if c}


def group_qubitwise(op: QubitOperator) -> list[list[tuple[complex, PauliString]]]:
    """First-fit grouping of non-identity terms into qubit-wise commuting sets."""
    groups: list[list[tuple[complex, PauliString]]] = []
    bases: list[dict[int, str]] = []
    for c, s in op.terms:
        if s.is_identity:
            continue
        for grp, basis in zip(groups, bases):
            if all(basis.get(q, a) == a for q, a in s.factors):
                grp.append((c, s))
                basis.update(s.as_dict())
                break
        else:
            groups.append([(c, s)])
            bases.append(dict(s.as_dict()))
    return groups


def _rotate_to_z(psi: np.ndarray, basis: dict[int, str], n: int) -> np.ndarray:
    for q, axis in sorted(basis.items()):
        if axis == "X":
            psi = apply_matrix(psi, _H, (q,), n)
        elif axis == "Y":
            psi = apply_matrix(psi, _H @ _SDG, (q,), n)
    return psi


@dataclass(frozen=True)
class SampledEstimate:
    value: float
    stderr: float
    shots_used: int
    n_groups: int


def estimate_from_state(op: QubitOperator, psi: np.ndarray, shots: int, seed: int) -> SampledEstimate:
    """Shot-based ``<op>`` on a prepared state vector.

    Qubit-wise commuting groups share a measurement basis (H for X, S^dag
    then H for Y). The shot budget is split evenly across groups, at least
    one shot each; group ``k`` draws from the stream seeded by ``(seed, k)``.
    """
    n = psi.shape[0].bit_length() - 1
    if op.num_qubits > n:
        raise WidthMismatch(f"operator needs {op.num_qubits} qubits, state has {n}")
    value = sum(c.real for c, s in op.terms if s.is_identity)
    groups = group_qubitwise(op)
    variance = 0.0
    used = 0
    if groups:
        per_group = max(1, shots // len(groups))
        outcomes = np.arange(1 << n, dtype=np.int64)
        for k, grp in enumerate(groups):
            basis: dict[int, str] = {}
            for _, s in grp:
                basis.update(s.as_dict())
            probs = np.abs(_rotate_to_z(psi, basis, n)) ** 2
            probs /= probs.sum()
            counts = np.random.default_rng([seed, k]).multinomial(per_group, probs)
            # per-outcome value of the whole group observable
            obs = np.zeros(1 << n)
            for c, s in grp:
                mask = sum(1 << q for q in s.support)
                obs += c.real * (1.0 - 2.0 * (np.bitwise_count(outcomes & mask) & 1))
            freq = counts / per_group
            mean = float(freq @ obs)
            value += mean
            variance += float(freq @ (obs - mean) ** 2) / per_group
            used += per_group
    return SampledEstimate(float(value), math.sqrt(variance), used, len(groups))


def estimate_expectation_sampled(
    op: QubitOperator,
    circuit: Circuit,
    bindings: Sequence[float],
    shots: int,
    seed: int,
    detailed: bool = False,
):
    """Run ``circuit`` and estimate ``<op>`` from shots (see :func:`estimate_from_state`).

    Returns a float, or the full :class:`SampledEstimate` when ``detailed``.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    psi = run_statevector(circuit, bindings).data
    est = estimate_from_state(op, psi, shots, seed)
    return est if detailed else est.value


# --- compiled Pauli-rotation programs (fast path for VQE) -------------------


@dataclass
class _Fixed:
    matrix: np.ndarray
    qubits: tuple[int, ...]


@dataclass
class _Rotation:
    """``exp(theta * B)`` with ``(B psi)[c] = d[c] * psi[src[c]]``.

    Fuses mutually commuting Pauli rotations that share one parameter and one
    X-mask. ``B`` is anti-Hermitian, so for a non-zero X-mask
    ``B**2 = -|d|**2`` and the exponential has a closed form.
    """

    index: int
    src: np.ndarray | None  # None for diagonal (pure-Z) rotations
    d: np.ndarray
    strings: list[tuple[float, PauliString]]

    def __post_init__(self):
        self.mag = np.abs(self.d)
        # unit-modulus direction of d (zero where d vanishes)
        self.unit = np.divide(self.d, self.mag, out=np.zeros_like(self.d), where=self.mag > 0)
        # a lone Pauli rotation has |d| constant; then cos/sin are per-column scalars
        self.flat = float(self.mag[0]) if np.all(self.mag == self.mag[0]) else None
        # excitation generators vanish on most basis states; touch only the rest
        self.active = None
        if self.src is not None and self.flat is None:
            active = np.flatnonzero(self.mag > 0)
            if 2 * active.size <= self.mag.size:
                self.active = active
                self._mag_a = self.mag[active]
                self._unit_a = self.unit[active]
                self._src_a = self.src[active]

    def forward(self, psi: np.ndarray, theta, sign: float = 1.0) -> np.ndarray:
        """Apply ``exp(sign * theta * B)``; ``theta`` may be one angle per batch column."""
        t = sign * np.asarray(theta, dtype=float)
        batched = psi.ndim == 2
        if self.src is None:
            d = self.d[:, None] if batched else self.d
            return np.exp(t * d) * psi
        if self.active is not None:
            mag = self._mag_a[:, None] if batched else self._mag_a
            unit = self._unit_a[:, None] if batched else self._unit_a
            out = psi.copy()
            out[self.active] = np.cos(t * mag) * psi[self.active] + np.sin(t * mag) * unit * psi[self._src_a]
            return out
        unit = self.unit[:, None] if batched else self.unit
        if self.flat is not None:
            mag = self.flat
        else:
            mag = self.mag[:, None] if batched else self.mag
        return np.cos(t * mag) * psi + np.sin(t * mag) * unit * psi[self.src]

    def generator(self, psi: np.ndarray) -> np.ndarray:
        d = self.d[:, None] if psi.ndim == 2 else self.d
        if self.src is None:
            return d * psi
        return d * psi[self.src]


def _as_rotation(gate: Gate) -> tuple[int, float, PauliString] | None:
    """``(parameter, scale, P)`` when the gate is ``exp(-i scale*theta/2 P)`` up to phase."""
    if not gate.is_parametric:
        return None
    (p,) = gate.params if len(gate.params) == 1 else (None,)
    if not isinstance(p, Param):
        return None
    q = gate.qubits
    if gate.kind == "PauliEvolution":
        return p.index, p.scale, gate.pauli
    if gate.kind in ("RX", "RY", "RZ"):
        return p.index, p.scale, PauliString(((q[0], gate.kind[1]),))
    if gate.kind == "U1":
        return p.index, p.scale, PauliString(((q[0], "Z"),))
    return None


class CompiledCircuit:
    """Circuit lowered to fixed unitaries and fused Pauli rotations.

    Supports energy evaluation and an adjoint-mode gradient in one forward
    and one backward sweep. Equal to :func:`run_statevector` up to a global
    phase (U1 is treated as RZ).
    """

    def __init__(self, circuit: Circuit):
        self.n_qubits = n = circuit.n_qubits
        self.num_parameters = circuit.num_parameters
        self.ops: list[_Fixed | _Rotation] = []
        idx = np.arange(1 << n, dtype=np.int64)
        pending: list[tuple[int, float, PauliString]] = []

        def flush():
            if not pending:
                return
            index, _, first = pending[0]
            d = np.zeros(1 << n, dtype=complex)
            for _, scale, s in pending:
                src = idx ^ s.x_mask
                parity = np.bitwise_count(src & s.z_mask) & 1
                d += (-0.5j * scale) * (1j**s.n_y) * (1.0 - 2.0 * parity)
            src = None if first.x_mask == 0 else idx ^ first.x_mask
            self.ops.append(_Rotation(index, src, d, [(sc, s) for _, sc, s in pending]))
            pending.clear()

        for g in circuit.gates:
            rot = _as_rotation(g)
            if rot is None:
                if g.is_parametric:
                    raise ValueError(f"{g.kind} with symbolic angles is not supported by the compiled path")
                flush()
                self.ops.append(_Fixed(g.matrix(), g.qubits))
                continue
            if pending and not (
                rot[0] == pending[0][0]
                and rot[2].x_mask == pending[0][2].x_mask
                and all(rot[2].commutes_with(s) for _, _, s in pending)
            ):
                flush()
            pending.append(rot)
        flush()

    def state(self, values: Sequence[float], initial: np.ndarray | None = None) -> np.ndarray:
        n = self.n_qubits
        if initial is None:
            psi = np.zeros(1 << n, dtype=complex)
            psi[0] = 1.0
        else:
            psi = np.array(initial, dtype=complex)
        for op in self.ops:
            if isinstance(op, _Fixed):
                psi = apply_matrix(psi, op.matrix, op.qubits, n)
            else:
                psi = op.forward(psi, values[op.index])
        return psi

    def states(self, values: np.ndarray, initial: np.ndarray | None = None) -> np.ndarray:
        """Columns are the states for each row of ``values`` (shape ``(batch, n_params)``)."""
        values = np.atleast_2d(np.asarray(values, dtype=float))
        dim = 1 << self.n_qubits
        if initial is None:
            psi = np.zeros((dim, values.shape[0]), dtype=complex)
            psi[0] = 1.0
        else:
            psi = np.repeat(np.asarray(initial, dtype=complex)[:, None], values.shape[0], axis=1)
        for op in self.ops:
            if isinstance(op, _Fixed):
                psi = apply_matrix(psi, op.matrix, op.qubits, self.n_qubits)
            else:
                psi = op.forward(psi, values[:, op.index])
        return psi

    def energies(self, op, values: np.ndarray, chunk: int | None = None) -> np.ndarray:
        """Energies for each row of ``values``, evaluated in memory-bounded chunks."""
        values = np.atleast_2d(np.asarray(values, dtype=float))
        compiled = self._compiled(op)
        chunk = chunk or max(1, (1 << 22) >> self.n_qubits)
        out = []
        for start in range(0, values.shape[0], chunk):
            psi = self.states(values[start : start + chunk])
            out.append(np.real(np.sum(psi.conj() * compiled.apply(psi), axis=0)))
        return np.concatenate(out)

    def _compiled(self, op) -> CompiledOperator:
        return op if isinstance(op, CompiledOperator) else CompiledOperator(op, self.n_qubits)

    def energy(self, op: QubitOperator | CompiledOperator, values: Sequence[float]) -> float:
        return self._compiled(op).expectation(self.state(values))

    def energy_and_gradient(
        self, op: QubitOperator | CompiledOperator, values: Sequence[float]
    ) -> tuple[float, np.ndarray]:
        n = self.n_qubits
        psi = self.state(values)
        lam = self._compiled(op).apply(psi)
        energy = float(np.vdot(psi, lam).real)
        grad = np.zeros(self.num_parameters)
        for o in reversed(self.ops):
            if isinstance(o, _Fixed):
                dag = o.matrix.conj().T
                psi = apply_matrix(psi, dag, o.qubits, n)
                lam = apply_matrix(lam, dag, o.qubits, n)
                continue
            grad[o.index] += 2.0 * np.vdot(lam, o.generator(psi)).real
            theta = values[o.index]
            psi = o.forward(psi, theta, -1.0)
            lam = o.forward(lam, theta, -1.0)
        return energy, grad


__all__ = [
    "DENSITY_LIMIT",
    "CompiledCircuit",
    "SampledEstimate",
    "apply_channel",
    "apply_matrix",
    "estimate_expectation_sampled",
    "estimate_from_state",
    "group_qubitwise",
    "run_density",
    "run_statevector",
    "sample_counts",
]
