import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aimvqe.errors import DimensionMismatch, IndexOutOfRange, SameSite
from aimvqe.fermion import (
    AimParameters,
    SpinOrbitalIndexing,
    build_aim_hamiltonian,
    ev_to_hartree,
    hartree_to_ev,
    jw_annihilation,
    jw_creation,
    shift_onsite_u,
    spin_z_operator,
    szsz_operator,
    total_number_operator,
)
from aimvqe.pauli import PauliString, QubitOperator, expectation, load_operator, to_matrix
from oracle import DATA, basis_state, fock_annihilation, fock_number


def as_dict(op):
    return {s: c for c, s in op.simplify().terms}


class TestModeOperators:
    def test_a0(self):
        assert as_dict(jw_annihilation(0, 1)) == {PauliString.from_label("X0"): 0.5, PauliString.from_label("Y0"): 0.5j}

    def test_a2(self):
        assert as_dict(jw_annihilation(2, 3)) == {
            PauliString.from_label("Z0 Z1 X2"): 0.5,
            PauliString.from_label("Z0 Z1 Y2"): 0.5j,
        }

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_matches_fock_space(self, n):
        for j in range(n):
            assert np.allclose(to_matrix(jw_annihilation(j, n), n), fock_annihilation(j, n), atol=1e-12)

    def test_anticommutation(self):
        n = 3
        a = [to_matrix(jw_annihilation(j, n), n) for j in range(n)]
        ad = [to_matrix(jw_creation(j, n), n) for j in range(n)]
        for j in range(n):
            for k in range(n):
                anti = a[j] @ ad[k] + ad[k] @ a[j]
                assert np.allclose(anti, np.eye(8) * (j == k), atol=1e-12)
                assert np.allclose(a[j] @ a[k] + a[k] @ a[j], 0, atol=1e-12)

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            jw_annihilation(3, 3)


def brute_force_aim(p: AimParameters) -> np.ndarray:
    """The AIM Hamiltonian summed literally on the Fock space."""
    idx = p.indexing()
    n = idx.n_qubits
    a = [fock_annihilation(j, n) for j in range(n)]
    ad = [m.conj().T for m in a]
    h = np.zeros((1 << n, 1 << n), dtype=complex)
    ni = p.n_impurity
    for s in (0, 1):
        for m in range(p.n_bath):
            for k in range(p.n_bath):
                qm, qk = idx.qubit(ni + m, s), idx.qubit(ni + k, s)
                t = p.eps_n[m, k] * ad[qm] @ a[qk]
                h += t + t.conj().T
                qk2 = idx.qubit(ni + k, 1 - s)
                t = p.eps_a[m, k] * ad[qm] @ ad[qk2]
                h += t + t.conj().T
            for i in range(ni):
                t = p.V[m, i] * ad[idx.qubit(ni + m, s)] @ a[idx.qubit(i, s)]
                h += t + t.conj().T
        for i in range(ni):
            h += p.mu * ad[idx.qubit(i, s)] @ a[idx.qubit(i, s)]
    for i in range(ni):
        up, dn = idx.pair(i)
        h += p.U * fock_number(up, n) @ fock_number(dn, n)
    return h


def random_params(rng, ni, nb, pairing=False):
    e = rng.normal(size=(nb, nb))
    eps_n = (e + e.T) / 2
    eps_a = None
    if pairing:
        g = rng.normal(size=(nb, nb))
        eps_a = (g - g.T) / 2
    return AimParameters(
        n_impurity=ni,
        n_bath=nb,
        eps_n=eps_n,
        eps_a=eps_a,
        V=rng.normal(size=(nb, ni)),
        mu=float(rng.normal()),
        U=float(abs(rng.normal())),
    )


class TestBuilder:
    def test_all_zero(self):
        assert len(build_aim_hamiltonian(AimParameters(1, 1))) == 0

    def test_u_cross_check(self):
        h = build_aim_hamiltonian(AimParameters(1, 0, U=0.29340))
        assert abs(h.coefficient("Z0 Z1") - 0.073350) <= 1e-6
        listing = load_operator(DATA / "hc_6q.txt")
        assert abs(h.coefficient("Z0 Z1") - listing.coefficient("Z0 Z1")) <= 1e-6

    def test_two_site_matches_fock(self):
        rng = np.random.default_rng(7)
        p = random_params(rng, 1, 1)
        assert np.allclose(to_matrix(build_aim_hamiltonian(p)), brute_force_aim(p), atol=1e-12)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([(1, 1), (1, 2), (2, 1)]), st.booleans())
    def test_spectrum_matches_fock(self, seed, shape, pairing):
        rng = np.random.default_rng(seed)
        p = random_params(rng, *shape, pairing=pairing)
        h = build_aim_hamiltonian(p)
        assert h.is_hamiltonian()
        ref = brute_force_aim(p)
        assert np.allclose(np.linalg.eigvalsh(to_matrix(h, p.indexing().n_qubits)), np.linalg.eigvalsh(ref), atol=1e-10)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([(1, 1), (2, 1), (2, 2), (1, 3)]))
    def test_number_conserving(self, seed, shape):
        p = random_params(np.random.default_rng(seed), *shape)
        n = p.indexing().n_qubits
        hm = to_matrix(build_aim_hamiltonian(p), n)
        nm = to_matrix(total_number_operator(n), n)
        assert np.linalg.norm(hm @ nm - nm @ hm) <= 1e-10

    def test_shape_errors(self):
        with pytest.raises(DimensionMismatch):
            AimParameters(1, 2, V=np.zeros((1, 1)))
        with pytest.raises(DimensionMismatch):
            AimParameters(1, 2, eps_n=np.array([[0, 1], [0, 0]]))


class TestShiftU:
    def test_zero_is_identity(self):
        h = load_operator(DATA / "hc_6q.txt")
        assert shift_onsite_u(h, [(0, 1), (2, 3)], 0.0) == h

    def test_zz_shift(self):
        h = load_operator(DATA / "hc_6q.txt")
        out = shift_onsite_u(h, [(0, 1), (2, 3)], 0.04)
        assert abs(out.coefficient("Z0 Z1") - 0.08335) <= 1e-12
        assert abs(out.coefficient("Z2 Z3") - (h.coefficient("Z2 Z3") + 0.01)) <= 1e-12
        assert out.is_hamiltonian()

    def test_bad_pairs(self):
        h = load_operator(DATA / "hc_6q.txt")
        with pytest.raises(IndexOutOfRange):
            shift_onsite_u(h, [(0, 9)], 0.1)
        with pytest.raises(IndexOutOfRange):
            shift_onsite_u(h, [(0, 1), (1, 2)], 0.1)

    def test_unit_conversion(self):
        assert ev_to_hartree(27.211386245988) == pytest.approx(1.0)
        assert hartree_to_ev(ev_to_hartree(6.0)) == pytest.approx(6.0)


class TestSpin:
    idx = SpinOrbitalIndexing(3)

    def test_sz_terms(self):
        assert as_dict(spin_z_operator(0, self.idx)) == {
            PauliString.from_label("Z1"): 0.25,
            PauliString.from_label("Z0"): -0.25,
        }

    def test_sz_values(self):
        sz = spin_z_operator(0, self.idx)
        assert expectation(sz, basis_state(6, [0])).real == 0.5
        assert expectation(sz, basis_state(6, [])).real == 0.0

    def test_szsz_terms(self):
        expected = {
            PauliString.from_label("Z0 Z2"): 1 / 16,
            PauliString.from_label("Z0 Z3"): -1 / 16,
            PauliString.from_label("Z1 Z2"): -1 / 16,
            PauliString.from_label("Z1 Z3"): 1 / 16,
        }
        assert as_dict(szsz_operator(0, 1, self.idx)) == expected

    def test_szsz_values(self):
        op = szsz_operator(0, 1, self.idx)
        assert expectation(op, basis_state(6, [0, 2])).real == 0.25
        assert expectation(op, basis_state(6, [1, 3])).real == 0.25
        assert expectation(op, basis_state(6, [0, 3])).real == -0.25
        assert expectation(op, basis_state(6, [])).real == 0.0

    def test_same_site(self):
        with pytest.raises(SameSite):
            szsz_operator(1, 1, self.idx)

    def test_indexing(self):
        assert self.idx.qubit(2, 1) == 5
        assert self.idx.site_of(5) == (2, 1)
        with pytest.raises(IndexOutOfRange):
            self.idx.qubit(3, 0)
