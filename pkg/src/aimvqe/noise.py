"""Kraus channels and gate-attached noise models.

Times: T1/T2 in microseconds, gate durations in nanoseconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import InvalidChannel, InvalidT2, ProbabilityOutOfRange

DEFAULT_DURATIONS_NS = {
    "U1": 0.0,
    "U2": 50.0,
    "U3": 100.0,
    "CNOT": 300.0,
    "measure": 1000.0,
    "reset": 1000.0,
}

_PAULIS = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


@dataclass(frozen=True, eq=False)
class KrausChannel:
    operators: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.operators)
        if not ops:
            raise InvalidChannel("a channel needs at least one Kraus operator")
        shape = ops[0].shape
        if len(shape) != 2 or shape[0] != shape[1] or any(k.shape != shape for k in ops):
            raise InvalidChannel("Kraus operators must be square and of equal dimension")
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    @property
    def num_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def completeness_error(self) -> float:
        total = sum(k.conj().T @ k for k in self.operators)
        return float(np.max(np.abs(total - np.eye(self.dim))))

    def is_cptp(self, tol: float = 1e-12) -> bool:
        return self.completeness_error() <= tol

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.operators)

    def superoperator(self) -> np.ndarray:
        """Matrix acting on row-major ``vec(rho)``: ``vec(K rho K^dag) = (K kron conj(K)) vec(rho)``."""
        return sum(np.kron(k, k.conj()) for k in self.operators)

    def compose(self, after: KrausChannel) -> KrausChannel:
        """Channel applying ``self`` first, then ``after``."""
        return KrausChannel(tuple(b @ a for b in after.operators for a in self.operators))

    def is_identity(self, tol: float = 1e-15) -> bool:
        return bool(np.max(np.abs(self.superoperator() - np.eye(self.dim**2))) <= tol)


def identity_channel(n_qubits: int = 1) -> KrausChannel:
    return KrausChannel((np.eye(1 << n_qubits, dtype=complex),))


def amplitude_damping_channel(gamma: float) -> KrausChannel:
    return KrausChannel(
        (
            np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
            np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex),
        )
    )


def phase_damping_channel(lam: float) -> KrausChannel:
    """Off-diagonals scale by ``sqrt(1 - lam)``; populations untouched."""
    return KrausChannel(
        (
            np.array([[1, 0], [0, math.sqrt(1 - lam)]], dtype=complex),
            np.array([[0, 0], [0, math.sqrt(lam)]], dtype=complex),
        )
    )


def _check_times(t1: float, t2: float):
    if t1 <= 0:
        raise InvalidT2(f"T1 must be positive, got {t1}")
    if t2 <= 0:
        raise InvalidT2(f"T2 must be positive, got {t2}")
    if t2 > 2 * t1:
        raise InvalidT2(f"T2={t2} exceeds 2*T1={2 * t1}")


def thermal_relaxation_channel(t1: float, t2: float, duration: float) -> KrausChannel:
    """Zero-temperature T1/T2 relaxation over ``duration`` ns.

    Amplitude damping with ``gamma = 1 - exp(-d/T1)`` followed by pure
    dephasing at rate ``1/T2 - 1/(2 T1)``, so coherences decay by exactly
    ``exp(-d/T2)``.
    """
    _check_times(t1, t2)
    if duration < 0:
        raise InvalidChannel(f"duration must be non-negative, got {duration}")
    if duration == 0:
        return identity_channel(1)
    d_us = duration * 1e-3
    gamma = -math.expm1(-d_us / t1)
    rate_phi = 1 / t2 - 1 / (2 * t1)
    # coherence factor of the dephasing part is exp(-d * rate_phi) = sqrt(1 - lam)
    lam = -math.expm1(-2 * d_us * rate_phi)
    return amplitude_damping_channel(gamma).compose(phase_damping_channel(lam))


def depolarizing_channel(p: float, n: int = 1) -> KrausChannel:
    """``rho -> (1 - p) rho + p I / 2**n`` for ``n`` in {1, 2}."""
    if not 0 <= p <= 1:
        raise ProbabilityOutOfRange(f"depolarizing probability {p} outside [0, 1]")
    if n not in (1, 2):
        raise InvalidChannel("depolarizing channel is defined here for 1 or 2 qubits")
    paulis = _PAULIS if n == 1 else [np.kron(b, a) for b in _PAULIS for a in _PAULIS]
    d2 = len(paulis)
    # (1-p) rho + p I/d  ==  (1 - p + p/d^2) rho + p/d^2 sum_{P != I} P rho P
    w0 = 1 - p + p / d2
    ops = [math.sqrt(w0) * paulis[0]]
    if p > 0:
        ops += [math.sqrt(p / d2) * P for P in paulis[1:]]
    return KrausChannel(tuple(ops))


def sample_qubit_times(
    n_qubits: int,
    seed: int,
    mean_t1: float = 50.0,
    sd_t1: float = 10.0,
    mean_t2: float = 70.0,
    sd_t2: float = 10.0,
) -> list[tuple[float, float]]:
    """Normal T1/T2 draws per qubit (us), with T2 clipped to at most 2*T1.

    Non-positive draws are redrawn from the same stream.
    """
    if min(mean_t1, mean_t2) <= 0 or min(sd_t1, sd_t2) < 0:
        raise ValueError("means must be positive and standard deviations non-negative")
    rng = np.random.default_rng(seed)

    def draw(mean, sd):
        while True:
            v = float(rng.normal(mean, sd))
            if v > 0:
                return v

    out = []
    for _ in range(n_qubits):
        t1 = draw(mean_t1, sd_t1)
        t2 = draw(mean_t2, sd_t2)
        out.append((t1, min(t2, 2 * t1)))
    return out


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Gate-attached noise.

    After a gate, each targeted operand gets its thermal channel (for the
    gate's scaled duration), and if ``depolarizing`` has an entry for the
    gate arity, a depolarizing channel on the whole gate when every operand
    is targeted, or on each targeted operand otherwise.
    """

    times: tuple[tuple[float, float], ...] = ()
    targets: frozenset[int] | None = None
    scale: float = 1.0
    durations: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_DURATIONS_NS))
    depolarizing: Mapping[int, float] = field(default_factory=dict)
    thermal: bool = True

    def __post_init__(self):
        if self.scale < 0:
            raise InvalidChannel(f"scale must be non-negative, got {self.scale}")
        for t1, t2 in self.times:
            _check_times(t1, t2)
        for k, d in self.durations.items():
            if d < 0:
                raise InvalidChannel(f"duration for {k} must be non-negative")
        for arity, p in self.depolarizing.items():
            if not 0 <= p <= 1:
                raise ProbabilityOutOfRange(f"depolarizing p={p} for arity {arity}")
        object.__setattr__(self, "_cache", {})

    def is_targeted(self, qubit: int) -> bool:
        return self.targets is None or qubit in self.targets

    def duration(self, kind: str) -> float:
        return self.scale * float(self.durations.get(kind, 0.0))

    def thermal_for(self, kind: str, qubit: int) -> KrausChannel | None:
        if not self.thermal or qubit >= len(self.times) or not self.is_targeted(qubit):
            return None
        key = ("thermal", kind, qubit)
        if key not in self._cache:
            t1, t2 = self.times[qubit]
            self._cache[key] = thermal_relaxation_channel(t1, t2, self.duration(kind))
        return self._cache[key]

    def channels_for(self, kind: str, qubits: Iterable[int]) -> list[tuple[tuple[int, ...], KrausChannel]]:
        qubits = tuple(qubits)
        out: list[tuple[tuple[int, ...], KrausChannel]] = []
        for q in qubits:
            ch = self.thermal_for(kind, q)
            if ch is not None and not (self.duration(kind) == 0):
                out.append(((q,), ch))
        p = self.depolarizing.get(len(qubits))
        if p:
            hit = [q for q in qubits if self.is_targeted(q)]
            if len(hit) == len(qubits):
                out.append((qubits, self._depol(p, len(qubits))))
            else:
                out.extend(((q,), self._depol(p, 1)) for q in hit)
        return out

    def _depol(self, p: float, n: int) -> KrausChannel:
        key = ("depol", p, n)
        if key not in self._cache:
            self._cache[key] = depolarizing_channel(p, n)
        return self._cache[key]

    def to_dict(self) -> dict:
        return {
            "times": [list(t) for t in self.times],
            "targets": sorted(self.targets) if self.targets is not None else None,
            "scale": self.scale,
            "durations": dict(self.durations),
            "depolarizing": {str(k): v for k, v in self.depolarizing.items()},
            "thermal": self.thermal,
        }


def build_noise_model(
    times,
    targets: Iterable[int] | None = None,
    scale: float = 1.0,
    durations: Mapping[str, float] | None = None,
    depolarizing: Mapping[int, float] | None = None,
) -> NoiseModel:
    """Thermal-relaxation model from per-qubit ``(t1, t2)`` pairs.

    ``scale`` multiplies every gate duration (0.5 gives the half-strength
    variant); only gates touching ``targets`` (all qubits when None) pick up
    channels.
    """
    merged = dict(DEFAULT_DURATIONS_NS)
    if durations:
        merged.update(durations)
    return NoiseModel(
        times=tuple((float(a), float(b)) for a, b in times),
        targets=frozenset(targets) if targets is not None else None,
        scale=float(scale),
        durations=merged,
        depolarizing=dict(depolarizing or {}),
    )


def depolarizing_noise_model(p: float, n_qubits: int, targets: Iterable[int] | None = None) -> NoiseModel:
    """Uniform depolarizing error ``p`` after every 1- and 2-qubit gate."""
    return NoiseModel(
        times=tuple((1.0, 1.0) for _ in range(n_qubits)),
        targets=frozenset(targets) if targets is not None else None,
        depolarizing={1: p, 2: p},
        thermal=False,
    )
