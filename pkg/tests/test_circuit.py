import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from aimvqe.ansatz import AnsatzSpec
from aimvqe.circuit import Circuit, Gate, Param, compare_gate_counts, count_gates, transpile
from aimvqe.errors import InvalidChannel, TooWide, UnboundParameter, WidthMismatch
from aimvqe.noise import KrausChannel, build_noise_model, depolarizing_noise_model, thermal_relaxation_channel
from aimvqe.pauli import PauliString, QubitOperator, expectation, load_operator
from aimvqe.simulator import (
    CompiledCircuit,
    apply_channel,
    estimate_expectation_sampled,
    run_density,
    run_statevector,
    sample_counts,
)
from aimvqe.states import DensityMatrix, StateVector
from aimvqe.vqe import VqeRun, run_vqe
from oracle import CNOT_LOCAL, DATA, X, Y, Z, basis_state, embed, kron_pauli, phase_fidelity, u3

H_LOCAL = np.array([[1, 1], [1, -1]]) / math.sqrt(2)


def oracle_local(g: Gate, values=()) -> np.ndarray:
    a = g.angles(values)
    k = g.kind
    if k == "U3":
        return u3(*a)
    if k == "U2":
        return u3(math.pi / 2, *a)
    if k == "U1":
        return u3(0, 0, *a)
    if k in ("RX", "RY", "RZ"):
        return expm(-0.5j * a[0] * {"RX": X, "RY": Y, "RZ": Z}[k])
    if k == "X":
        return X
    if k == "H":
        return H_LOCAL
    if k == "CNOT":
        return CNOT_LOCAL
    if k == "SWAP":
        return np.eye(4)[[0, 2, 1, 3]]
    raise AssertionError(k)


def oracle_unitary(c: Circuit, values=()) -> np.ndarray:
    u = np.eye(1 << c.n_qubits, dtype=complex)
    for g in c.gates:
        if g.kind == "PauliEvolution":
            m = expm(-0.5j * g.angles(values)[0] * kron_pauli(dict(g.pauli.factors), c.n_qubits))
        else:
            m = embed(oracle_local(g, values), g.qubits, c.n_qubits)
        u = m @ u
    return u


KINDS_1Q = ["U1", "U2", "U3", "RX", "RY", "RZ", "X", "H"]


@st.composite
def circuits(draw, max_qubits=4, max_gates=25):
    n = draw(st.integers(2, max_qubits))
    c = Circuit(n)
    angle = st.floats(-math.pi, math.pi, allow_nan=False)
    for _ in range(draw(st.integers(0, max_gates))):
        kind = draw(st.sampled_from(KINDS_1Q + ["CNOT", "SWAP", "PauliEvolution"]))
        if kind in ("CNOT", "SWAP"):
            a, b = draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
            c.append(Gate(kind, (a, b)))
        elif kind == "PauliEvolution":
            axes = draw(st.lists(st.sampled_from("IXYZ"), min_size=n, max_size=n))
            if set(axes) == {"I"}:
                continue
            s = PauliString.from_dict({q: p for q, p in enumerate(axes) if p != "I"})
            c.pauli_evolution(s, draw(angle))
        else:
            nparams = {"U1": 1, "U2": 2, "U3": 3, "X": 0, "H": 0}.get(kind, 1)
            c.append(Gate(kind, (draw(st.integers(0, n - 1)),), tuple(draw(angle) for _ in range(nparams))))
    return c


class TestGateModel:
    def test_arity_checked(self):
        with pytest.raises(ValueError):
            Gate("CNOT", (0,))
        with pytest.raises(ValueError):
            Gate("CNOT", (1, 1))
        with pytest.raises(ValueError):
            Gate("U3", (0,), (0.1,))

    def test_operands_in_range(self):
        with pytest.raises(WidthMismatch):
            Circuit(2).cnot(0, 2)

    def test_undeclared_parameter(self):
        with pytest.raises(UnboundParameter):
            Circuit(1).rz(Param(0), 0)

    def test_unbound_at_run(self):
        c = Circuit(1)
        c.rz(c.add_parameter("a"), 0)
        with pytest.raises(UnboundParameter):
            run_statevector(c, [])


class TestStatevector:
    def test_empty(self):
        assert np.array_equal(run_statevector(Circuit(2)).data, basis_state(2, []))

    def test_bell_corner(self):
        c = Circuit(2).x(0).cnot(0, 1)
        assert np.allclose(run_statevector(c).data, basis_state(2, [0, 1]))

    def test_zz_evolution(self):
        theta = 0.731
        c = Circuit(2).h(0).h(1).pauli_evolution(PauliString.from_label("Z0 Z1"), theta)
        prep = np.full(4, 0.5, dtype=complex)
        ref = expm(-0.5j * theta * kron_pauli({0: "Z", 1: "Z"}, 2)) @ prep
        assert np.allclose(run_statevector(c).data, ref, atol=1e-12)

    def test_width_mismatch(self):
        with pytest.raises(WidthMismatch):
            run_statevector(Circuit(2), initial=StateVector.zero(3))

    @settings(max_examples=40, deadline=None)
    @given(circuits())
    def test_matches_dense_oracle(self, c):
        got = run_statevector(c).data
        ref = oracle_unitary(c)[:, 0]
        assert np.allclose(got, ref, atol=1e-10)

    @settings(max_examples=15, deadline=None)
    @given(circuits(max_qubits=4))
    def test_transpile_preserves_state_up_to_phase(self, c):
        psi = run_statevector(c).data
        native = transpile(c)
        assert all(g.kind in ("U1", "U2", "U3", "CNOT") for g in native.gates)
        assert phase_fidelity(run_statevector(native).data, psi) >= 1 - 1e-10

    def test_unitarity_large(self):
        rng = np.random.default_rng(0)
        n = 10
        c = Circuit(n)
        for _ in range(200):
            if rng.random() < 0.3:
                a, b = rng.choice(n, 2, replace=False)
                c.cnot(int(a), int(b))
            else:
                c.u3(*rng.uniform(-3, 3, 3), int(rng.integers(n)))
        assert abs(run_statevector(c).norm() - 1) <= 1e-10

    def test_compiled_matches_reference(self):
        spec = AnsatzSpec("GeneralizedUCCSD", 4, reference=(0, 1))
        c = spec.build_circuit()
        vals = np.random.default_rng(2).uniform(-1, 1, c.num_parameters)
        cc = CompiledCircuit(c)
        assert phase_fidelity(cc.state(vals), run_statevector(c, vals).data) >= 1 - 1e-12


class TestDensity:
    @settings(max_examples=15, deadline=None)
    @given(circuits(max_qubits=3, max_gates=15))
    def test_noiseless_equals_pure(self, c):
        psi = run_statevector(c).data
        rho = run_density(c).data
        assert np.allclose(rho, np.outer(psi, psi.conj()), atol=1e-12)

    def test_backend_agreement_8q(self):
        rng = np.random.default_rng(5)
        c = Circuit(8)
        for _ in range(60):
            if rng.random() < 0.3:
                a, b = rng.choice(8, 2, replace=False)
                c.cnot(int(a), int(b))
            else:
                c.u3(*rng.uniform(-3, 3, 3), int(rng.integers(8)))
        op = load_operator(DATA / "hc_8q.txt")
        e_sv = expectation(op, run_statevector(c)).real
        e_dm = expectation(op, run_density(c)).real
        assert abs(e_sv - e_dm) <= 1e-10

    def test_full_depolarizing_x(self):
        c = Circuit(2).x(0)
        rho = run_density(c, noise=depolarizing_noise_model(1.0, 2, targets=[0])).data
        reduced = np.einsum("ajbj->ab", rho.reshape(2, 2, 2, 2))  # trace out qubit 0
        assert np.allclose(np.einsum("jajb->ab", rho.reshape(2, 2, 2, 2)), np.eye(2) / 2, atol=1e-12)
        assert np.allclose(reduced, np.diag([1, 0]), atol=1e-12)

    def test_thermal_coherence(self):
        rho = run_density(Circuit(1).h(0)).data
        rho = apply_channel(DensityMatrix(rho), thermal_relaxation_channel(50, 70, 100), [0]).data
        assert abs(abs(rho[0, 1]) - 0.5 * math.exp(-0.1 / 70)) <= 1e-12

    def test_channels_only_on_targets(self):
        nm = build_noise_model([(50, 70)] * 2, targets=[1])
        c = Circuit(2).h(0)
        rho = run_density(c, noise=nm).data
        assert abs(abs(rho[0, 1]) - 0.5) <= 1e-12

    def test_trace_preserved_500_noisy_gates(self):
        rng = np.random.default_rng(1)
        c = Circuit(3)
        for _ in range(500):
            if rng.random() < 0.3:
                a, b = rng.choice(3, 2, replace=False)
                c.cnot(int(a), int(b))
            else:
                c.u3(*rng.uniform(-3, 3, 3), int(rng.integers(3)))
        nm = build_noise_model([(40, 60), (50, 70), (60, 90)], depolarizing={1: 1e-3, 2: 1e-2})
        rho = run_density(c, noise=nm)
        assert abs(rho.trace() - 1) <= 1e-9
        assert rho.is_valid()

    def test_too_wide(self):
        with pytest.raises(TooWide):
            run_density(Circuit(11))

    def test_invalid_channel(self):
        bad = KrausChannel((np.eye(2) * 1.1,))
        with pytest.raises(InvalidChannel):
            apply_channel(DensityMatrix.zero(1), bad, [0])


class TestSampling:
    def test_zero_state(self):
        assert sample_counts(StateVector.zero(3), 1000, seed=1) == {"000": 1000}

    def test_plus_frequency(self):
        plus = run_statevector(Circuit(1).h(0))
        counts = sample_counts(plus, 10**6, seed=7)
        assert abs(counts["0"] / 1e6 - 0.5) <= 0.002

    def test_seeded(self):
        psi = run_statevector(Circuit(2).h(0).h(1))
        assert sample_counts(psi, 500, 3) == sample_counts(psi, 500, 3)
        assert sample_counts(psi.to_density(), 500, 3) == sample_counts(psi, 500, 3)

    def test_bitstring_order(self):
        assert sample_counts(StateVector.basis(3, [0]), 10, 0) == {"001": 10}

    def test_bad_shots(self):
        with pytest.raises(ValueError):
            sample_counts(StateVector.zero(1), 0, 0)

    def test_identity_operator(self):
        op = QubitOperator.identity(2.5)
        est = estimate_expectation_sampled(op, Circuit(2), [], 10, 0, detailed=True)
        assert est.value == 2.5 and est.stderr == 0

    def test_z_on_plus(self):
        val = estimate_expectation_sampled(QubitOperator.term("Z0"), Circuit(1).h(0), [], 10**6, 4)
        assert abs(val) <= 0.004

    @pytest.mark.parametrize("shots", [10**3, 10**5])
    def test_converges_at_4_sigma(self, shots):
        rng = np.random.default_rng(3)
        c = Circuit(3)
        for q in range(3):
            c.u3(*rng.uniform(-3, 3, 3), q)
        c.cnot(0, 1).cnot(1, 2)
        op = QubitOperator.from_terms([(0.7, "X0 Y1"), (-0.3, "Z2"), (0.2, "Y0 Y2"), (0.5, "X1")])
        exact = expectation(op, run_statevector(c)).real
        est = estimate_expectation_sampled(op, c, [], shots, 9, detailed=True)
        assert abs(est.value - exact) <= 4 * est.stderr

    def test_converged_vqe_6q(self):
        h = load_operator(DATA / "hc_6q.txt")
        c = AnsatzSpec("GeneralizedUCCSD", 6, reference=(0, 1, 2, 3)).build_circuit()
        trace = run_vqe(VqeRun(h, c))
        exact = expectation(h, run_statevector(c, trace.parameters)).real
        est = estimate_expectation_sampled(h, c, trace.parameters, 10**5, 11, detailed=True)
        assert abs(est.value - exact) <= 5 * est.stderr


class TestGateCounts:
    def test_h_cnot(self):
        assert count_gates(Circuit(2).h(0).cnot(0, 1)) == {"CNOT": 1, "U2": 1}

    def test_empty(self):
        assert count_gates(Circuit(3)) == {}

    def test_comparison_rows(self):
        rows = compare_gate_counts({"U2": 10, "CNOT": 20, "U1": 5, "U3": 4})
        assert rows == [("U2", 10, 288), ("CNOT", 20, 280), ("U1", 5, 184), ("U", 4, 4)]

    def test_reference_uccsd_counts(self):
        c = AnsatzSpec("GeneralizedUCCSD", 6, reference=(0, 1, 2, 3)).build_circuit()
        assert count_gates(c) == {"CNOT": 2684, "U1": 1334, "U2": 1858, "U3": 4}
