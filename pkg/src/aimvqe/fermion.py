"""Jordan-Wigner compilation of the Anderson impurity model.

Spin orbitals are laid out site-major with spin up first: site ``s`` and
spin ``sigma`` live on qubit ``2*s + (0 if up else 1)``. Impurity sites take
the lowest site indices, bath sites follow. This is the layout of the bundled
Hc Hamiltonians (U-type ZZ terms on (0,1) and (2,3), hoppings between qubits
of equal parity).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, SameSite
from .pauli import PauliString, QubitOperator

HARTREE_TO_EV = 27.211386245988

UP, DOWN = 0, 1


@dataclass(frozen=True)
class SpinOrbitalIndexing:
    n_sites: int

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_sites

    def qubit(self, site: int, spin: int) -> int:
        if not 0 <= site < self.n_sites:
            raise IndexOutOfRange(f"site {site} outside 0..{self.n_sites - 1}")
        if spin not in (UP, DOWN):
            raise IndexOutOfRange(f"spin label {spin} is not 0 (up) or 1 (down)")
        return 2 * site + spin

    def site_of(self, qubit: int) -> tuple[int, int]:
        if not 0 <= qubit < self.n_qubits:
            raise IndexOutOfRange(f"qubit {qubit} outside 0..{self.n_qubits - 1}")
        return divmod(qubit, 2)

    def pair(self, site: int) -> tuple[int, int]:
        return self.qubit(site, UP), self.qubit(site, DOWN)


@dataclass
class AimParameters:
    """Parameters of the multi-site Anderson impurity model (energies in E_h).

    ``eps_n`` is the bath particle-hole hopping (n_bath x n_bath, Hermitian),
    ``eps_a`` the bath particle-particle (pairing) channel, ``V`` the
    bath-impurity hybridization (n_bath x n_impurity). Matrices are shared by
    both spin species. ``j_hund`` is carried as metadata only.
    """

    n_impurity: int
    n_bath: int
    eps_n: np.ndarray | None = None
    eps_a: np.ndarray | None = None
    V: np.ndarray | None = None
    mu: float = 0.0
    U: float = 0.0
    j_hund: float | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        nb, ni = self.n_bath, self.n_impurity
        self.eps_n = np.zeros((nb, nb)) if self.eps_n is None else np.asarray(self.eps_n, dtype=complex)
        self.eps_a = np.zeros((nb, nb)) if self.eps_a is None else np.asarray(self.eps_a, dtype=complex)
        self.V = np.zeros((nb, ni)) if self.V is None else np.asarray(self.V, dtype=complex)
        if self.eps_n.shape != (nb, nb):
            raise DimensionMismatch(f"eps_n has shape {self.eps_n.shape}, expected {(nb, nb)}")
        if self.eps_a.shape != (nb, nb):
            raise DimensionMismatch(f"eps_a has shape {self.eps_a.shape}, expected {(nb, nb)}")
        if self.V.shape != (nb, ni):
            raise DimensionMismatch(f"V has shape {self.V.shape}, expected {(nb, ni)}")
        if nb and np.max(np.abs(self.eps_n - self.eps_n.conj().T)) > 1e-12:
            raise DimensionMismatch("eps_n must be Hermitian")

    @property
    def n_sites(self) -> int:
        return self.n_impurity + self.n_bath

    def indexing(self) -> SpinOrbitalIndexing:
        return SpinOrbitalIndexing(self.n_sites)


def jw_annihilation(j: int, n: int) -> QubitOperator:
    """``a_j = Z_0 ... Z_{j-1} (X_j + i Y_j) / 2``."""
    if not 0 <= j < n:
        raise IndexOutOfRange(f"mode {j} outside 0..{n - 1}")
    chain = tuple((k, "Z") for k in range(j))
    return QubitOperator(
        (
            (0.5, PauliString(chain + ((j, "X"),))),
            (0.5j, PauliString(chain + ((j, "Y"),))),
        ),
        declared_qubits=n,
    )


def jw_creation(j: int, n: int) -> QubitOperator:
    return jw_annihilation(j, n).adjoint()


def number_operator(j: int, n: int) -> QubitOperator:
    """``n_j = (I - Z_j) / 2``."""
    return QubitOperator(((0.5, PauliString()), (-0.5, PauliString(((j, "Z"),)))), n)


def hopping_term(p: int, q: int, amplitude: complex, n: int) -> QubitOperator:
    """``amplitude * a_p^dag a_q + h.c.``"""
    t = amplitude * (jw_creation(p, n) * jw_annihilation(q, n))
    return t + t.adjoint()


def _pairing_term(p: int, q: int, amplitude: complex, n: int) -> QubitOperator:
    t = amplitude * (jw_creation(p, n) * jw_creation(q, n))
    return t + t.adjoint()


def onsite_interaction(a: int, b: int, u: float, n: int) -> QubitOperator:
    """``u * n_a n_b = (u/4)(I - Z_a - Z_b + Z_a Z_b)``."""
    return QubitOperator(
        (
            (u / 4, PauliString()),
            (-u / 4, PauliString(((a, "Z"),))),
            (-u / 4, PauliString(((b, "Z"),))),
            (u / 4, PauliString(((a, "Z"), (b, "Z")))),
        ),
        n,
    )


def build_aim_hamiltonian(params: AimParameters, indexing: SpinOrbitalIndexing | None = None) -> QubitOperator:
    """Jordan-Wigner image of the AIM Hamiltonian.

    Sums, in order: bath particle-hole hopping ``eps_n`` and pairing ``eps_a``
    (each plus its Hermitian conjugate, taken literally, so a Hermitian
    ``eps_n`` contributes twice), bath-impurity hybridization ``V``,
    the impurity chemical-potential term ``mu * n`` and the impurity onsite
    repulsion ``U n_up n_down``.
    """
    indexing = indexing or params.indexing()
    if indexing.n_sites != params.n_sites:
        raise DimensionMismatch(
            f"indexing has {indexing.n_sites} sites, parameters need {params.n_sites}"
        )
    n = indexing.n_qubits
    ni = params.n_impurity
    bath_site = lambda m: ni + m  # noqa: E731
    h = QubitOperator(declared_qubits=n)
    for spin in (UP, DOWN):
        for m in range(params.n_bath):
            for k in range(params.n_bath):
                qm, qk = indexing.qubit(bath_site(m), spin), indexing.qubit(bath_site(k), spin)
                e = params.eps_n[m, k]
                if e == 0:
                    continue
                if m == k:
                    # eps a^dag a + h.c. on the diagonal is 2 Re(eps) n
                    h = h + 2 * e.real * number_operator(qm, n)
                elif m < k:
                    # (m,k) and (k,m) entries together with their h.c.
                    h = h + hopping_term(qm, qk, 2 * e, n)
        for m in range(params.n_bath):
            for k in range(params.n_bath):
                e = params.eps_a[m, k]
                if e == 0:
                    continue
                qm = indexing.qubit(bath_site(m), spin)
                qk = indexing.qubit(bath_site(k), 1 - spin)
                h = h + _pairing_term(qm, qk, e, n)
        for m in range(params.n_bath):
            for i in range(ni):
                v = params.V[m, i]
                if v == 0:
                    continue
                qm, qi = indexing.qubit(bath_site(m), spin), indexing.qubit(i, spin)
                h = h + hopping_term(qm, qi, v, n)
        if params.mu:
            for i in range(ni):
                h = h + params.mu * number_operator(indexing.qubit(i, spin), n)
    if params.U:
        for i in range(ni):
            a, b = indexing.pair(i)
            h = h + onsite_interaction(a, b, params.U, n)
    return h.simplify().real_coefficients()


def shift_onsite_u(h: QubitOperator, impurity_pairs, delta_u: float) -> QubitOperator:
    """Add ``delta_u * n_a n_b`` for every impurity qubit pair ``(a, b)``."""
    n = h.num_qubits
    seen: set[int] = set()
    for a, b in impurity_pairs:
        for q in (a, b):
            if not 0 <= q < n:
                raise IndexOutOfRange(f"qubit {q} outside operator width {n}")
            if q in seen:
                raise IndexOutOfRange(f"qubit {q} appears in more than one pair")
            seen.add(q)
    if delta_u == 0:
        return h
    out = h
    for a, b in impurity_pairs:
        out = out + onsite_interaction(a, b, delta_u, n)
    return out.simplify()


def spin_z_operator(site: int, indexing: SpinOrbitalIndexing) -> QubitOperator:
    """``S_z = (n_up - n_down)/2 = (Z_down - Z_up)/4``."""
    up, down = indexing.pair(site)
    return QubitOperator(
        ((0.25, PauliString(((down, "Z"),))), (-0.25, PauliString(((up, "Z"),)))),
        indexing.n_qubits,
    )


def szsz_operator(i: int, j: int, indexing: SpinOrbitalIndexing) -> QubitOperator:
    if i == j:
        raise SameSite(f"S_z correlation needs two different sites, got {i} twice")
    return (spin_z_operator(i, indexing) * spin_z_operator(j, indexing)).simplify()


def total_number_operator(n: int) -> QubitOperator:
    out = QubitOperator(declared_qubits=n)
    for j in range(n):
        out = out + number_operator(j, n)
    return out.simplify()


def total_spin_z_operator(indexing: SpinOrbitalIndexing) -> QubitOperator:
    out = QubitOperator(declared_qubits=indexing.n_qubits)
    for s in range(indexing.n_sites):
        out = out + spin_z_operator(s, indexing)
    return out.simplify()


def ev_to_hartree(value_ev: float) -> float:
    return value_ev / HARTREE_TO_EV


def hartree_to_ev(value_eh: float) -> float:
    return value_eh * HARTREE_TO_EV
