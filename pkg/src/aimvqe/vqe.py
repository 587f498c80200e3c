"""The VQE loop: backends, optimizers and convergence tracing."""

from __future__ import annotations

import hashlib
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.optimize import minimize

from .circuit import Circuit, Gate, Param, transpile
from .errors import UnsupportedAnsatz
from .noise import NoiseModel
from .pauli import CompiledOperator, QubitOperator, expectation
from .simulator import CompiledCircuit, estimate_from_state, run_density

OptimizerKind = Literal["SPSA", "NelderMead", "ParameterShiftGD", "BFGS"]
DETERMINISTIC = ("NelderMead", "ParameterShiftGD", "BFGS")
# Nelder-Mead's best vertex can stall for many steps while the simplex still
# contracts, so it relies on its own xatol/fatol test instead
PLATEAU_RULE = ("ParameterShiftGD", "BFGS")
PLATEAU_WINDOW = 10
PLATEAU_RTOL = 1e-8


@dataclass(frozen=True)
class OptimizerConfig:
    kind: OptimizerKind = "BFGS"
    max_iterations: int = 300
    seed: int = 0
    # SPSA: a_k = a / (A + k + 1)**alpha, c_k = c / (k + 1)**gamma
    a: float = 0.2
    c: float = 0.1
    alpha: float = 0.602
    gamma: float = 0.101
    stability: float = 0.0
    # NelderMead
    simplex_scale: float = 0.1
    xtol: float = 1e-10
    ftol: float = 1e-12
    # ParameterShiftGD / BFGS
    learning_rate: float = 0.5
    grad_tol: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("SPSA", *DETERMINISTIC):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("a", "c", "simplex_scale", "xtol", "ftol", "learning_rate", "grad_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.stability < 0 or self.alpha <= 0 or self.gamma <= 0:
            raise ValueError("SPSA exponents must be positive and stability non-negative")


@dataclass(frozen=True)
class Backend:
    kind: Literal["exact", "sampled", "density"] = "exact"
    shots: int = 10_000
    noise: NoiseModel | None = None

    def __post_init__(self):
        if self.kind not in ("exact", "sampled", "density"):
            raise ValueError(f"unknown backend {self.kind!r}")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")


def wrap_angles(values) -> np.ndarray:
    """Map angles into ``(-pi, pi]``."""
    v = np.asarray(values, dtype=float)
    return v - 2 * math.pi * np.ceil((v - math.pi) / (2 * math.pi))


def parameter_hash(values) -> str:
    return hashlib.sha256(np.asarray(values, dtype=float).tobytes()).hexdigest()[:12]


def derive_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(1)[0])


class VqeRun:
    """One optimization experiment.

    The energy of UCC circuits is ``2 pi``-periodic in each parameter (each
    excitation generator satisfies ``G**3 = -G``) and EfficientSU2 energies
    are too, so parameters are wrapped into ``(-pi, pi]`` before binding.
    """

    def __init__(
        self,
        hamiltonian: QubitOperator,
        circuit: Circuit,
        backend: Backend | None = None,
        optimizer: OptimizerConfig | None = None,
        initial_parameters: Sequence[float] | None = None,
        seed: int = 0,
    ):
        self.hamiltonian = hamiltonian
        self.circuit = circuit
        self.backend = backend or Backend()
        self.optimizer = optimizer or OptimizerConfig()
        self.seed = seed
        n_par = circuit.num_parameters
        x0 = np.zeros(n_par) if initial_parameters is None else np.asarray(initial_parameters, float)
        if x0.shape != (n_par,):
            raise ValueError(f"expected {n_par} initial parameters, got {x0.shape[0]}")
        self.initial_parameters = x0
        if hamiltonian.num_qubits > circuit.n_qubits:
            raise ValueError("Hamiltonian is wider than the ansatz circuit")
        self._compiled_op = CompiledOperator(hamiltonian, circuit.n_qubits)
        self._compiled: CompiledCircuit | None = None
        self._native: Circuit | None = None
        self.evaluations = 0

    @property
    def compiled(self) -> CompiledCircuit:
        if self._compiled is None:
            self._compiled = CompiledCircuit(self.circuit)
        return self._compiled

    @property
    def native(self) -> Circuit:
        if self._native is None:
            self._native = transpile(self.circuit)
        return self._native

    @property
    def is_constant(self) -> bool:
        return all(s.is_identity for _, s in self.hamiltonian.terms)

    def energy(self, params, index: int | None = None) -> float:
        """Energy at ``params``; ``index`` selects the seed stream of stochastic backends."""
        theta = wrap_angles(params)
        if index is None:
            index = self.evaluations
        self.evaluations += 1
        kind = self.backend.kind
        if kind == "exact":
            return self.compiled.energy(self._compiled_op, theta)
        if kind == "sampled":
            psi = self.compiled.state(theta)
            return estimate_from_state(self.hamiltonian, psi, self.backend.shots, derive_seed(self.seed, index)).value
        rho = run_density(self.native, theta, self.backend.noise, lower=False)
        return float(expectation(self.hamiltonian, rho).real)

    def energy_and_gradient(self, params) -> tuple[float, np.ndarray]:
        if self.backend.kind != "exact":
            raise UnsupportedAnsatz("analytic gradients need the exact backend")
        self.evaluations += 1
        return self.compiled.energy_and_gradient(self._compiled_op, wrap_angles(params))


def evaluate_energy(run: VqeRun, params) -> float:
    return run.energy(params)


def _unfold(circuit: Circuit) -> tuple[Circuit, list[tuple[int, float]]]:
    """One fresh parameter per parametric gate occurrence: ``phi_g = scale * theta[index]``."""
    out = Circuit(circuit.n_qubits)
    occurrences: list[tuple[int, float]] = []
    for g in circuit.gates:
        if not g.is_parametric:
            out.gates.append(g)
            continue
        if g.kind not in ("RX", "RY", "RZ", "U1", "PauliEvolution"):
            raise UnsupportedAnsatz(f"parameter-shift rule needs single-angle rotations, got {g.kind}")
        (p,) = g.params
        slot = out.add_parameter(f"g{len(occurrences)}")
        occurrences.append((p.index, p.scale))
        out.gates.append(Gate(g.kind, g.qubits, (slot,), g.pauli))
    return out, occurrences


def parameter_shift_gradient(run: VqeRun, params, threads: int = 1) -> np.ndarray:
    """``dE/dtheta_j = sum_g s_g (E(phi_g + pi/2) - E(phi_g - pi/2)) / 2``.

    The sum runs over the gate occurrences ``g`` that use parameter ``j``
    with scale ``s_g``. Exact backend only.
    """
    if run.backend.kind != "exact":
        raise UnsupportedAnsatz("parameter-shift gradients are implemented for the exact backend")
    theta = wrap_angles(params)
    unfolded, occ = _unfold(run.circuit)
    compiled = CompiledCircuit(unfolded)
    phi = np.array([scale * theta[i] for i, scale in occ])

    k = len(occ)
    shifts = np.repeat(phi[None, :], 2 * k, axis=0)
    shifts[np.arange(k), np.arange(k)] += math.pi / 2
    shifts[k + np.arange(k), np.arange(k)] -= math.pi / 2
    if threads > 1 and k > 1:
        blocks = np.array_split(shifts, threads)
        with ThreadPoolExecutor(threads) as pool:
            energies = np.concatenate(list(pool.map(lambda b: compiled.energies(run._compiled_op, b), blocks)))
    else:
        energies = compiled.energies(run._compiled_op, shifts)
    partials = 0.5 * (energies[:k] - energies[k:])
    run.evaluations += 2 * k
    grad = np.zeros(run.circuit.num_parameters)
    for (i, scale), d in zip(occ, partials):
        grad[i] += scale * d
    return grad


@dataclass
class TraceRecord:
    iteration: int
    energy: float
    params_hash: str
    evaluations: int
    wall_ms: float


@dataclass
class ConvergenceTrace:
    records: list[TraceRecord] = field(default_factory=list)
    energy: float = float("nan")
    parameters: list[float] = field(default_factory=list)
    converged: bool = False
    reason: str = ""

    @property
    def iterations(self) -> int:
        return self.records[-1].iteration if self.records else 0

    @property
    def evaluations(self) -> int:
        return self.records[-1].evaluations if self.records else 0

    def best_so_far(self) -> list[float]:
        return list(np.minimum.accumulate([r.energy for r in self.records]))

    def summary(self) -> dict:
        return {
            "energy": self.energy,
            "converged": self.converged,
            "reason": self.reason,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "parameters": list(self.parameters),
        }


class _Stop(Exception):
    pass


class _Recorder:
    def __init__(self, run: VqeRun, trace: ConvergenceTrace, on_record, deterministic: bool):
        self.run, self.trace, self.on_record = run, trace, on_record
        self.deterministic = deterministic
        self.start = time.perf_counter()
        self.iteration = 0

    def record(self, energy: float, params) -> None:
        rec = TraceRecord(
            self.iteration,
            float(energy),
            parameter_hash(params),
            self.run.evaluations,
            round((time.perf_counter() - self.start) * 1000.0, 3),
        )
        self.trace.records.append(rec)
        if self.on_record is not None:
            self.on_record(rec)
        self.iteration += 1
        if self.deterministic and len(self.trace.records) > PLATEAU_WINDOW:
            old = self.trace.records[-1 - PLATEAU_WINDOW].energy
            scale = max(abs(energy), 1e-300)
            if abs(energy - old) / scale < PLATEAU_RTOL:
                raise _Stop("relative energy change below 1e-8 over 10 iterations")


def run_vqe(run: VqeRun, on_record: Callable[[TraceRecord], None] | None = None) -> ConvergenceTrace:
    """Optimize until ``max_iterations`` or convergence; every iteration is traced.

    Gradient-based optimizers stop once the energy changes by less than 1e-8
    (relative) across 10 iterations, or when their gradient test passes;
    Nelder-Mead stops on its simplex tolerances. SPSA always runs its full budget. Iteration 0 is the starting point.
    """
    cfg = run.optimizer
    trace = ConvergenceTrace()
    rec = _Recorder(run, trace, on_record, cfg.kind in PLATEAU_RULE)
    x = wrap_angles(run.initial_parameters)
    best = {"x": x.copy(), "e": math.inf}

    def note(e, params):
        if e < best["e"]:
            best["x"], best["e"] = np.array(params, float), e

    try:
        if cfg.kind == "SPSA":
            _spsa(run, cfg, x, rec, note)
        elif cfg.kind == "BFGS":
            _bfgs(run, cfg, x, rec, note, trace)
        elif cfg.kind == "NelderMead":
            _nelder_mead(run, cfg, x, rec, note, trace)
        else:
            _gradient_descent(run, cfg, x, rec, note, trace)
    except _Stop as stop:
        trace.converged, trace.reason = True, str(stop)
    if not trace.reason:
        trace.reason = "iteration budget exhausted"
    if cfg.kind == "SPSA":
        # SPSA records probe averages; report a fresh evaluation of the final iterate
        final_x = rec.final_x
        trace.energy = run.energy(final_x)
        trace.parameters = [float(v) for v in wrap_angles(final_x)]
    else:
        trace.energy = float(best["e"])
        trace.parameters = [float(v) for v in wrap_angles(best["x"])]
    return trace


def _start(run: VqeRun, x, rec: _Recorder, note, trace: ConvergenceTrace, grad=None) -> bool:
    """Record iteration 0; True when the start point is already stationary."""
    e = run.energy(x)
    note(e, x)
    rec.record(e, x)
    if run.is_constant:
        trace.converged, trace.reason = True, "objective is constant"
        return True
    if grad is not None and np.linalg.norm(grad) < run.optimizer.grad_tol:
        trace.converged, trace.reason = True, "gradient norm below tolerance"
        return True
    return False


def _bfgs(run, cfg, x, rec, note, trace):
    if run.backend.kind == "exact":
        e0, g0 = run.energy_and_gradient(x)

        def fun(p):
            e, g = run.energy_and_gradient(p)
            note(e, p)
            return e, g

        jac = True
    else:
        g0 = None

        def fun(p):
            e = run.energy(p)
            note(e, p)
            return e

        jac = None
    if _start(run, x, rec, note, trace, g0):
        return

    def callback(intermediate_result):
        rec.record(intermediate_result.fun, intermediate_result.x)

    res = minimize(
        fun, x, jac=jac, method="BFGS", callback=callback,
        options={"maxiter": cfg.max_iterations, "gtol": cfg.grad_tol},
    )
    if res.success:
        trace.converged, trace.reason = True, "gradient norm below tolerance"


def _nelder_mead(run, cfg, x, rec, note, trace):
    if _start(run, x, rec, note, trace):
        return

    def fun(p):
        e = run.energy(p)
        note(e, p)
        return e

    simplex = np.vstack([x] + [x + cfg.simplex_scale * np.eye(len(x))[i] for i in range(len(x))])

    def callback(intermediate_result):
        rec.record(intermediate_result.fun, intermediate_result.x)

    res = minimize(
        fun, x, method="Nelder-Mead", callback=callback,
        options={
            "maxiter": cfg.max_iterations, "xatol": cfg.xtol, "fatol": cfg.ftol,
            "initial_simplex": simplex, "adaptive": len(x) > 10,
        },
    )
    if res.success:
        trace.converged, trace.reason = True, "simplex tolerance reached"


def _gradient_descent(run, cfg, x, rec, note, trace):
    g = parameter_shift_gradient(run, x)
    if _start(run, x, rec, note, trace, g):
        return
    for _ in range(cfg.max_iterations):
        x = x - cfg.learning_rate * g
        g = parameter_shift_gradient(run, x)
        e = run.energy(x)
        note(e, x)
        rec.record(e, x)
        if np.linalg.norm(g) < cfg.grad_tol:
            trace.converged, trace.reason = True, "gradient norm below tolerance"
            return


def _spsa(run, cfg, x, rec, note):
    rng = np.random.default_rng(cfg.seed)
    e = run.energy(x)
    rec.record(e, x)
    for k in range(cfg.max_iterations):
        ak = cfg.a / (cfg.stability + k + 1) ** cfg.alpha
        ck = cfg.c / (k + 1) ** cfg.gamma
        delta = rng.choice((-1.0, 1.0), size=len(x))
        e_plus = run.energy(x + ck * delta)
        e_minus = run.energy(x - ck * delta)
        # 1/delta_i == delta_i for Rademacher perturbations
        x = wrap_angles(x - ak * (e_plus - e_minus) / (2 * ck) * delta)
        rec.record(0.5 * (e_plus + e_minus), x)
    rec.final_x = x


def run_summary(trace: ConvergenceTrace) -> dict:
    out = trace.summary()
    out["trace_length"] = len(trace.records)
    return out


def trace_rows(trace: ConvergenceTrace) -> list[dict]:
    return [
        {k: v for k, v in asdict(r).items() if k in ("iteration", "energy", "evaluations", "wall_ms")}
        for r in trace.records
    ]


__all__ = [
    "Backend",
    "ConvergenceTrace",
    "OptimizerConfig",
    "TraceRecord",
    "VqeRun",
    "evaluate_energy",
    "parameter_shift_gradient",
    "run_vqe",
    "wrap_angles",
]
