"""UCC-family and hardware-efficient parameterized circuits.

Excitation convention: ``single(p, q)`` is ``T = a_q^dag a_p`` and
``double(p, q, r, s)`` is ``T = a_r^dag a_s^dag a_q a_p``; each contributes
the anti-Hermitian generator ``T - T^dag``. "Generalized" pools use every
spin-orbital pair with no occupied/virtual split.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Literal

import numpy as np

from .circuit import Circuit, Param
from .errors import ElectronCountOutOfRange, IndexOutOfRange, OddWidth
from .fermion import SpinOrbitalIndexing, jw_annihilation, jw_creation
from .pauli import PauliString, QubitOperator

Family = Literal["GeneralizedUCCS", "GeneralizedUCCSD", "SpinConservedUCCSD", "EfficientSU2"]
FAMILIES = ("GeneralizedUCCS", "GeneralizedUCCSD", "SpinConservedUCCSD", "EfficientSU2")


@dataclass(frozen=True)
class Excitation:
    kind: Literal["single", "double"]
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = self.indices
        if self.kind == "single":
            if len(idx) != 2 or not idx[0] < idx[1]:
                raise ValueError(f"single excitation needs p < q, got {idx}")
        elif self.kind == "double":
            if len(idx) != 4:
                raise ValueError(f"double excitation needs four indices, got {idx}")
            p, q, r, s = idx
            if not (p < q and r < s and (p, q) < (r, s)) or {p, q} & {r, s}:
                raise ValueError(f"double excitation needs disjoint ordered pairs, got {idx}")
        else:
            raise ValueError(f"unknown excitation kind {self.kind!r}")
        if min(idx) < 0:
            raise IndexOutOfRange(f"negative spin-orbital index in {idx}")

    @property
    def label(self) -> str:
        return f"{self.kind[0]}{self.indices}".replace(" ", "")

    def operator(self, n: int) -> QubitOperator:
        """JW image of ``T``."""
        if max(self.indices) >= n:
            raise IndexOutOfRange(f"excitation {self.indices} exceeds width {n}")
        if self.kind == "single":
            p, q = self.indices
            return jw_creation(q, n) * jw_annihilation(p, n)
        p, q, r, s = self.indices
        return jw_creation(r, n) * jw_creation(s, n) * jw_annihilation(q, n) * jw_annihilation(p, n)


@dataclass(frozen=True)
class AnsatzSpec:
    family: Family
    n_qubits: int
    reps: int = 1
    reference: tuple[int, ...] = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown ansatz family {self.family!r}")
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if self.reps < 0:
            raise ValueError("reps must be non-negative")
        object.__setattr__(self, "reference", tuple(sorted(set(self.reference))))
        for q in self.reference:
            if not 0 <= q < self.n_qubits:
                raise IndexOutOfRange(f"reference qubit {q} outside 0..{self.n_qubits - 1}")

    def build_circuit(self) -> Circuit:
        if self.family == "EfficientSU2":
            circ = Circuit(self.n_qubits)
            for q in self.reference:
                circ.x(q)
            su2 = efficient_su2_circuit(self.n_qubits, self.reps)
            circ.parameters = su2.parameters
            circ.gates.extend(su2.gates)
            return circ
        return synthesize_ucc_circuit(build_pool(self), self.n_qubits, self.reference)


def _spin(q: int) -> int:
    return q % 2


def build_pool(spec: AnsatzSpec) -> list[Excitation]:
    """Singles then doubles, each in lexicographic index order."""
    n = spec.n_qubits
    if spec.family == "EfficientSU2":
        return []
    spin_conserving = spec.family == "SpinConservedUCCSD"
    if spin_conserving and n % 2:
        raise OddWidth(f"spin-labelled pool needs an even number of qubits, got {n}")
    pairs = list(combinations(range(n), 2))
    singles = [
        Excitation("single", pq) for pq in pairs if not spin_conserving or _spin(pq[0]) == _spin(pq[1])
    ]
    if spec.family == "GeneralizedUCCS":
        return singles
    doubles = []
    for (p, q), (r, s) in combinations(pairs, 2):
        if {p, q} & {r, s}:
            continue
        if spin_conserving and sorted((_spin(p), _spin(q))) != sorted((_spin(r), _spin(s))):
            continue
        doubles.append(Excitation("double", (p, q, r, s)))
    return singles + doubles


def excitation_to_generator(e: Excitation, n: int) -> QubitOperator:
    t = e.operator(n)
    return (t - t.adjoint()).simplify()


def synthesize_ucc_circuit(pool: list[Excitation], n: int, reference: Iterable[int] = ()) -> Circuit:
    """X gates on the reference, then one Pauli-evolution product per excitation.

    A generator term ``i c P`` becomes ``PauliEvolution(P, -2 c theta)``, so
    each factor equals ``exp(theta * i c P)``; all terms of one excitation
    share its parameter.
    """
    if not pool:
        raise ValueError("excitation pool is empty")
    circ = Circuit(n)
    for q in sorted(set(reference)):
        circ.x(q)
    for e in pool:
        theta = circ.add_parameter(e.label)
        for c, s in excitation_to_generator(e, n).terms:
            circ.pauli_evolution(s, Param(theta.index, -2.0 * c.imag))
    return circ


def efficient_su2_circuit(n: int, reps: int) -> Circuit:
    """``reps + 1`` RY/RZ layers with a linear CNOT chain between layers."""
    if reps < 0:
        raise ValueError("reps must be non-negative")
    circ = Circuit(n)
    for layer in range(reps + 1):
        for axis in ("y", "z"):
            for q in range(n):
                p = circ.add_parameter(f"r{axis}[{layer},{q}]")
                getattr(circ, "r" + axis)(p, q)
        if layer < reps:
            for q in range(n - 1):
                circ.cnot(q, q + 1)
    return circ


def onsite_energies(h: QubitOperator, n: int | None = None) -> np.ndarray:
    """Per-qubit orbital energy read off single-Z terms: ``eps n = eps/2 (I - Z)``."""
    n = h.num_qubits if n is None else n
    return np.array([-2.0 * h.coefficient(PauliString(((q, "Z"),))).real for q in range(n)])


def hartree_fock_reference(
    n: int,
    n_electrons: int,
    indexing: SpinOrbitalIndexing | None = None,
    energies: Iterable[float] | None = None,
) -> tuple[int, ...]:
    """Fill the ``n_electrons`` lowest-energy spin orbitals (ascending qubit on ties).

    Without ``energies`` all orbitals are degenerate and the lowest qubit
    indices are filled.
    """
    if indexing is not None and indexing.n_qubits != n:
        raise IndexOutOfRange(f"indexing covers {indexing.n_qubits} qubits, width is {n}")
    if not 0 <= n_electrons <= n:
        raise ElectronCountOutOfRange(f"{n_electrons} electrons for {n} spin orbitals")
    eps = np.zeros(n) if energies is None else np.asarray(list(energies), dtype=float)
    if eps.shape != (n,):
        raise IndexOutOfRange(f"expected {n} orbital energies, got {eps.shape[0]}")
    order = sorted(range(n), key=lambda q: (eps[q], q))
    return tuple(sorted(order[:n_electrons]))


@dataclass
class Ansatz:
    """A spec together with its built circuit."""

    spec: AnsatzSpec
    circuit: Circuit = field(init=False)

    def __post_init__(self):
        self.circuit = self.spec.build_circuit()

    @property
    def num_parameters(self) -> int:
        return self.circuit.num_parameters
