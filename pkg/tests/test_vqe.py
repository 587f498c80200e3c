import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aimvqe.ansatz import AnsatzSpec
from aimvqe.errors import UnsupportedAnsatz
from aimvqe.noise import build_noise_model, sample_qubit_times
from aimvqe.pauli import QubitOperator, load_operator
from aimvqe.vqe import (
    Backend,
    OptimizerConfig,
    VqeRun,
    derive_seed,
    evaluate_energy,
    parameter_shift_gradient,
    run_vqe,
    trace_rows,
    wrap_angles,
)
from oracle import DATA, E0_6Q, basis_state, dense_from_terms, parse_listing_naive

H6 = load_operator(DATA / "hc_6q.txt")
REF = (0, 1, 2, 3)


def circuit(family="GeneralizedUCCSD", reps=1, ref=REF):
    return AnsatzSpec(family, 6, reps=reps, reference=ref if family != "EfficientSU2" else ()).build_circuit()


def dense_h6():
    return dense_from_terms(parse_listing_naive(DATA / "hc_6q.txt"), 6)


def fd_gradient(run, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (evaluate_energy(run, x + e) - evaluate_energy(run, x - e)) / (2 * h)
    return g


class TestEnergy:
    def test_identity(self):
        run = VqeRun(QubitOperator.identity(-0.3), circuit())
        for x in np.random.default_rng(0).uniform(-3, 3, (3, 60)):
            assert evaluate_energy(run, x) == pytest.approx(-0.3, abs=1e-14)

    def test_reference_energy(self):
        psi = basis_state(6, REF)
        ref = np.vdot(psi, dense_h6() @ psi).real
        run = VqeRun(H6, circuit())
        assert evaluate_energy(run, np.zeros(60)) == pytest.approx(ref, abs=1e-12)

    def test_variational_bound(self):
        run = VqeRun(H6, circuit())
        xs = np.random.default_rng(1).uniform(-math.pi, math.pi, (200, 60))
        assert min(evaluate_energy(run, x) for x in xs) >= E0_6Q - 1e-10

    def test_wrapping(self):
        w = wrap_angles([math.pi, -math.pi, 3 * math.pi, 0.1 + 2 * math.pi, -3.5])
        assert np.allclose(w, [math.pi, math.pi, math.pi, 0.1, -3.5 + 2 * math.pi])
        run = VqeRun(H6, circuit("GeneralizedUCCS"))
        x = np.random.default_rng(2).uniform(-3, 3, 15)
        assert evaluate_energy(run, x + 2 * math.pi) == pytest.approx(evaluate_energy(run, x), abs=1e-12)

    def test_backends_agree(self):
        c = circuit("GeneralizedUCCS")
        x = np.random.default_rng(3).uniform(-1, 1, 15)
        exact = evaluate_energy(VqeRun(H6, c), x)
        dens = evaluate_energy(VqeRun(H6, c, Backend("density")), x)
        assert dens == pytest.approx(exact, abs=1e-10)
        sampled = VqeRun(H6, c, Backend("sampled", shots=20000), seed=5)
        assert abs(sampled.energy(x, index=0) - exact) < 0.02
        assert sampled.energy(x, index=0) == sampled.energy(x, index=0)

    def test_noisy_density_is_above_exact(self):
        c = circuit("GeneralizedUCCS")
        nm = build_noise_model(sample_qubit_times(6, 0), scale=1.0)
        x = np.zeros(15)
        assert evaluate_energy(VqeRun(H6, c, Backend("density", noise=nm)), x) > evaluate_energy(VqeRun(H6, c), x)

    def test_length_checked(self):
        with pytest.raises(ValueError):
            VqeRun(H6, circuit(), initial_parameters=np.zeros(3))


class TestGradient:
    @pytest.mark.parametrize("family, reps", [("GeneralizedUCCSD", 1), ("EfficientSU2", 2)])
    def test_matches_finite_differences(self, family, reps):
        c = circuit(family, reps)
        run = VqeRun(H6, c)
        x = np.random.default_rng(4).uniform(-1, 1, c.num_parameters)
        ps = parameter_shift_gradient(run, x)
        assert np.max(np.abs(ps - fd_gradient(run, x))) <= 1e-5
        _, adj = run.energy_and_gradient(x)
        assert np.allclose(ps, adj, atol=1e-10)

    def test_threads_agree(self):
        run = VqeRun(H6, circuit())
        x = np.random.default_rng(5).uniform(-1, 1, 60)
        assert np.array_equal(parameter_shift_gradient(run, x), parameter_shift_gradient(run, x, threads=4))

    def test_zero_hamiltonian(self):
        run = VqeRun(QubitOperator(declared_qubits=6), circuit("GeneralizedUCCS"))
        assert not parameter_shift_gradient(run, np.ones(15)).any()

    def test_stationary_at_minimum(self):
        run = VqeRun(H6, circuit())
        trace = run_vqe(run)
        assert np.linalg.norm(parameter_shift_gradient(run, trace.parameters)) <= 1e-6

    def test_exact_backend_only(self):
        with pytest.raises(UnsupportedAnsatz):
            parameter_shift_gradient(VqeRun(H6, circuit(), Backend("sampled")), np.zeros(60))


class TestRun:
    def test_guccsd_reaches_half_percent(self):
        trace = run_vqe(VqeRun(H6, circuit(), optimizer=OptimizerConfig("BFGS", max_iterations=300)))
        assert abs(trace.energy - E0_6Q) / abs(E0_6Q) <= 5e-3
        assert trace.iterations <= 300 and trace.converged

    def test_identity_converges_immediately(self):
        for kind in ("BFGS", "NelderMead", "ParameterShiftGD"):
            trace = run_vqe(VqeRun(QubitOperator.identity(0.7), circuit("GeneralizedUCCS"), optimizer=OptimizerConfig(kind)))
            assert trace.converged and trace.iterations == 0 and trace.energy == pytest.approx(0.7)

    @pytest.mark.parametrize("kind", ["BFGS", "NelderMead", "ParameterShiftGD"])
    def test_deterministic_trace_properties(self, kind):
        cfg = OptimizerConfig(kind, max_iterations=40)
        a = run_vqe(VqeRun(H6, circuit("GeneralizedUCCS"), optimizer=cfg))
        b = run_vqe(VqeRun(H6, circuit("GeneralizedUCCS"), optimizer=cfg))
        strip = lambda t: [(r.iteration, r.energy, r.params_hash, r.evaluations) for r in t.records]
        assert strip(a) == strip(b)
        its = [r.iteration for r in a.records]
        assert its == list(range(len(its)))
        best = a.best_so_far()
        assert all(x >= y for x, y in zip(best, best[1:]))
        assert all(r.energy >= E0_6Q - 1e-10 for r in a.records)

    def test_plateau_rule(self):
        trace = run_vqe(VqeRun(H6, circuit("GeneralizedUCCS"), optimizer=OptimizerConfig("ParameterShiftGD", max_iterations=2000, learning_rate=0.5)))
        assert trace.converged
        assert trace.iterations < 2000

    def test_spsa_reproducible(self):
        def go():
            run = VqeRun(H6, circuit("GeneralizedUCCS"), Backend("sampled", shots=500),
                         OptimizerConfig("SPSA", max_iterations=30, seed=9), seed=2)
            return run_vqe(run)

        a, b = go(), go()
        assert [r.energy for r in a.records] == [r.energy for r in b.records]
        assert a.energy == b.energy and not a.converged
        assert a.evaluations == 1 + 2 * 30

    @pytest.mark.slow
    def test_spsa_10000_iterations_sampled(self):
        run = VqeRun(H6, circuit("GeneralizedUCCS"), Backend("sampled", shots=200),
                     OptimizerConfig("SPSA", max_iterations=10000, seed=1), seed=3)
        trace = run_vqe(run)
        assert trace.iterations == 10000 and trace.reason == "iteration budget exhausted"
        assert math.isfinite(trace.energy)

    def test_streaming_callback(self):
        seen = []
        trace = run_vqe(VqeRun(H6, circuit("GeneralizedUCCS"), optimizer=OptimizerConfig(max_iterations=5)), on_record=seen.append)
        assert seen == trace.records
        assert [set(r) for r in trace_rows(trace)][0] == {"iteration", "energy", "evaluations", "wall_ms"}

    def test_bad_config(self):
        with pytest.raises(ValueError):
            OptimizerConfig("Adam")
        with pytest.raises(ValueError):
            OptimizerConfig(max_iterations=0)
        with pytest.raises(ValueError):
            Backend("cloud")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 1000))
def test_seed_derivation(master, index):
    assert derive_seed(master, index) == derive_seed(master, index)
    assert derive_seed(master, index) != derive_seed(master, index + 1)
