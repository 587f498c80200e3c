"""Experiment configuration, the experiment catalog and CSV/JSON persistence.

A config is one JSON object. Every section is optional except the
Hamiltonian; omitted keys take the defaults declared on the models below,
and the fully resolved config is written into every output JSON.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__
from .ansatz import FAMILIES, AnsatzSpec, hartree_fock_reference, onsite_energies
from .circuit import Circuit, compare_gate_counts, count_gates, transpile
from .cluster import ClusterParameters, exchange_coupling_up0, monte_carlo_j
from .errors import ConfigError, ZeroReference
from .fermion import (
    AimParameters,
    SpinOrbitalIndexing,
    build_aim_hamiltonian,
    ev_to_hartree,
    shift_onsite_u,
    szsz_operator,
)
from .noise import NoiseModel, build_noise_model, depolarizing_noise_model, sample_qubit_times
from .pauli import QubitOperator, expectation, load_operator
from .spectral import (
    deviation_metrics,
    exact_ground_state,
    fit_loglog_slope,
    golden_record,
)
from .topology import DEFAULT_EDGES, CouplingMap, placement_from_config, route_circuit
from .vqe import Backend, ConvergenceTrace, OptimizerConfig, VqeRun, derive_seed, run_vqe

TRACE_COLUMNS = ("iteration", "energy_hartree", "evaluations", "wall_ms")
SWEEP_COLUMNS = (
    "sweep_name",
    "sweep_value",
    "seed",
    "energy_hartree",
    "energy_dev_abs",
    "energy_dev_pct",
    "corr",
    "corr_dev_pct",
)
CORRELATION_COLUMNS = ("topology", "ansatz", "szsz")
BUNDLED_PREFIX = "bundled:"


# --- config models -----------------------------------------------------------


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BuilderSection(_Section):
    """Parameters for building an AIM Hamiltonian instead of reading a listing."""

    n_impurity: int = Field(ge=0)
    n_bath: int = Field(ge=0)
    eps_n: list[list[float]] | None = None
    eps_a: list[list[float]] | None = None
    V: list[list[float]] | None = None
    mu: float = 0.0
    U: float = 0.0


class HamiltonianSection(_Section):
    source: str | None = None  # file path (relative to the config) or "bundled:<name>"
    builder: BuilderSection | None = None
    # absolute impurity U in eV; the listing's own U is base_u (E_h)
    onsite_u_ev: float | None = None
    base_u: float = 0.29340
    impurity_pairs: list[tuple[int, int]] = [(0, 1), (2, 3)]

    @model_validator(mode="after")
    def _one_source(self):
        if (self.source is None) == (self.builder is None):
            raise ValueError("give exactly one of 'source' or 'builder'")
        return self


class AnsatzSection(_Section):
    family: Literal["GeneralizedUCCS", "GeneralizedUCCSD", "SpinConservedUCCSD", "EfficientSU2"] = (
        "GeneralizedUCCSD"
    )
    reps: int = Field(1, ge=0)
    reference: list[int] | None = None
    # None: electron count taken from the exact ground state's sector
    n_electrons: int | None = Field(None, ge=0)
    initial: Literal["zeros", "random"] = "zeros"
    initial_scale: float = Field(0.1, gt=0)


class BackendSection(_Section):
    kind: Literal["exact", "sampled", "density"] = "exact"
    shots: int = Field(10_000, ge=1)


class NoiseSection(_Section):
    kind: Literal["none", "thermal", "depolarizing"] = "none"
    # "reevaluate": converged noiseless parameters evaluated under noise;
    # "optimize": the optimizer runs on the noisy density backend
    protocol: Literal["reevaluate", "optimize"] = "reevaluate"
    seed: int | None = None
    targets: Union[list[int], str, None] = None
    scale: float = Field(1.0, ge=0)
    durations: dict[str, float] = {}
    depolarizing: dict[int, float] = {}
    p: float = Field(0.0, ge=0, le=1)  # uniform depolarizing rate for kind="depolarizing"
    t1_mean: float = Field(50.0, gt=0)
    t1_sd: float = Field(10.0, ge=0)
    t2_mean: float = Field(70.0, gt=0)
    t2_sd: float = Field(10.0, ge=0)


class TopologySection(_Section):
    n_physical: int = Field(7, ge=1)
    edges: list[tuple[int, int]] = [tuple(e) for e in DEFAULT_EDGES]
    placement: Union[str, list[int], dict[str, int], None] = None
    restore_layout: bool = True


class OptimizerSection(_Section):
    kind: Literal["SPSA", "NelderMead", "ParameterShiftGD", "BFGS"] = "BFGS"
    max_iterations: int = Field(300, ge=1)
    a: float = 0.2
    c: float = 0.1
    alpha: float = 0.602
    gamma: float = 0.101
    stability: float = 0.0
    simplex_scale: float = 0.1
    xtol: float = 1e-10
    ftol: float = 1e-12
    learning_rate: float = 0.5
    grad_tol: float = 1e-8


class SweepSection(_Section):
    variable: Literal["depolarizing_p", "onsite_u", "targets", "placement", "ansatz"]
    values: list[Union[float, str, list[int]]] = Field(min_length=1)
    seeds: list[int] = [0]


class CorrelationRow(_Section):
    topology: str | None = None
    ansatz: Literal["GeneralizedUCCS", "GeneralizedUCCSD", "SpinConservedUCCSD", "EfficientSU2"]
    noisy: bool = False


class CorrelationSection(_Section):
    sites: tuple[int, int] = (0, 1)
    rows: list[CorrelationRow] = []
    include_exact: bool = True


class JModelSection(_Section):
    delta: float = 0.2104
    t_pd: float = 0.0578
    u_d: float = 0.2934
    u_p: float = 0.0
    amplitude: float = Field(0.01, ge=0)
    source: Literal["delta", "t_pd"] = "t_pd"
    n_samples: int = Field(1000, ge=1)


class ExperimentConfig(_Section):
    id: str = "experiment"
    seed: int = 0
    hamiltonian: HamiltonianSection | None = None
    ansatz: AnsatzSection = AnsatzSection()
    backend: BackendSection = BackendSection()
    noise: NoiseSection = NoiseSection()
    topology: TopologySection | None = None
    optimizer: OptimizerSection = OptimizerSection()
    sweep: SweepSection | None = None
    correlation: CorrelationSection | None = None
    jmodel: JModelSection | None = None
    output_dir: str | None = None


def _field_path(loc) -> str:
    return ".".join(str(p) for p in loc) or "<root>"


def parse_config(data: dict, base_dir: str | Path = ".") -> tuple[ExperimentConfig, Path]:
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as err:
        first = err.errors()[0]
        raise ConfigError(_field_path(first["loc"]), first["msg"]) from None
    return cfg, Path(base_dir)


def load_config(path) -> tuple[ExperimentConfig, Path]:
    """Read and validate a JSON config; relative paths resolve against its directory."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError("config", f"invalid JSON at line {err.lineno}, column {err.colno}: {err.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return parse_config(data, path.parent)


def resolved_config(cfg: ExperimentConfig) -> dict:
    return cfg.model_dump(mode="json")


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(resolved_config(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def bundled_config_path(name: str) -> Path:
    return Path(str(resources.files("aimvqe") / "data" / "configs" / f"{name}.json"))


def bundled_configs() -> list[str]:
    root = Path(str(resources.files("aimvqe") / "data" / "configs"))
    return sorted(p.stem for p in root.glob("*.json"))


# --- problem assembly --------------------------------------------------------


def resolve_source(source: str, base_dir: Path) -> Path:
    if source.startswith(BUNDLED_PREFIX):
        name = source[len(BUNDLED_PREFIX):]
        path = Path(str(resources.files("aimvqe") / "data" / f"{name}.txt"))
    else:
        path = Path(source)
        if not path.is_absolute():
            path = base_dir / path
    if not path.is_file():
        raise ConfigError("hamiltonian.source", f"file not found: {source}")
    return path


def load_hamiltonian(section: HamiltonianSection | None, base_dir: Path, onsite_u_ev: float | None = None) -> QubitOperator:
    if section is None:
        raise ConfigError("hamiltonian", "a Hamiltonian source or builder is required")
    if section.source is not None:
        h = load_operator(resolve_source(section.source, base_dir))
    else:
        b = section.builder
        try:
            params = AimParameters(
                n_impurity=b.n_impurity, n_bath=b.n_bath, eps_n=b.eps_n, eps_a=b.eps_a, V=b.V, mu=b.mu, U=b.U
            )
        except ValueError as err:
            raise ConfigError("hamiltonian.builder", str(err)) from None
        h = build_aim_hamiltonian(params)
    u_ev = section.onsite_u_ev if onsite_u_ev is None else onsite_u_ev
    if u_ev is not None:
        h = shift_onsite_u(h, section.impurity_pairs, ev_to_hartree(u_ev) - section.base_u)
    return h


@dataclass
class Problem:
    """A Hamiltonian with its exact reference values and an ansatz circuit."""

    hamiltonian: QubitOperator
    n_qubits: int
    indexing: SpinOrbitalIndexing
    sites: tuple[int, int]
    e0: float
    corr0: float
    reference: tuple[int, ...]
    family: str
    circuit: Circuit
    ground_sector: float

    @property
    def correlation_operator(self) -> QubitOperator:
        return szsz_operator(*self.sites, self.indexing)


def build_problem(
    cfg: ExperimentConfig,
    base_dir: Path,
    family: str | None = None,
    onsite_u_ev: float | None = None,
    sites: tuple[int, int] = (0, 1),
) -> Problem:
    h = load_hamiltonian(cfg.hamiltonian, base_dir, onsite_u_ev)
    n = h.num_qubits
    if n % 2:
        raise ConfigError("hamiltonian", f"spin-orbital layout needs an even width, got {n}")
    indexing = SpinOrbitalIndexing(n // 2)
    gs = exact_ground_state(h)
    corr0 = float(expectation(szsz_operator(*sites, indexing), gs.state.data).real)
    a = cfg.ansatz
    if a.reference is not None:
        reference = tuple(a.reference)
    else:
        n_el = a.n_electrons if a.n_electrons is not None else int(round(gs.sector))
        reference = hartree_fock_reference(n, n_el, indexing, onsite_energies(h, n))
    fam = family or a.family
    try:
        spec = AnsatzSpec(fam, n, reps=a.reps, reference=reference)
    except (ValueError, IndexError) as err:
        raise ConfigError("ansatz", str(err)) from None
    return Problem(h, n, indexing, sites, gs.energy, corr0, reference, fam, spec.build_circuit(), gs.sector)


def optimizer_config(section: OptimizerSection, seed: int) -> OptimizerConfig:
    try:
        return OptimizerConfig(seed=seed, **section.model_dump())
    except ValueError as err:
        raise ConfigError("optimizer", str(err)) from None


def initial_parameters(section: AnsatzSection, n_params: int, seed: int) -> np.ndarray:
    if section.initial == "zeros":
        return np.zeros(n_params)
    return np.random.default_rng(seed).normal(0.0, section.initial_scale, n_params)


def named_targets(spec, n_qubits: int) -> tuple[int, ...] | None:
    """Logical target qubits: a list, or imp1 / imp2 / imps / bath / all."""
    if spec is None or spec == "all":
        return None
    if isinstance(spec, str):
        groups = {
            "imp1": (0, 1),
            "imp2": (2, 3),
            "imps": (0, 1, 2, 3),
            "bath": tuple(range(4, n_qubits)),
        }
        if spec not in groups:
            raise ConfigError("noise.targets", f"unknown target group {spec!r}")
        return groups[spec]
    out = tuple(int(q) for q in spec)
    for q in out:
        if not 0 <= q < n_qubits:
            raise ConfigError("noise.targets", f"qubit {q} outside 0..{n_qubits - 1}")
    return out


@dataclass
class Layout:
    """Native circuit on the physical register with logical observables relabeled."""

    circuit: Circuit
    n_physical: int
    initial: tuple[int, ...]
    final: tuple[int, ...]
    swaps: int

    def observable(self, op: QubitOperator) -> QubitOperator:
        return op.relabel({i: p for i, p in enumerate(self.final)}, self.n_physical)

    def physical(self, logical: tuple[int, ...] | None) -> tuple[int, ...] | None:
        return None if logical is None else tuple(self.initial[q] for q in logical)


def build_layout(problem: Problem, section: TopologySection | None, placement=None) -> Layout:
    native = transpile(problem.circuit)
    n = problem.n_qubits
    if section is None and placement is None:
        ident = tuple(range(n))
        return Layout(native, n, ident, ident, 0)
    section = section or TopologySection()
    try:
        cmap = CouplingMap(section.n_physical, section.edges)
        place = placement_from_config(placement if placement is not None else section.placement, cmap, n)
    except (ValueError, IndexError, KeyError) as err:
        raise ConfigError("topology", str(err)) from None
    routed = route_circuit(native, cmap, place, restore_layout=section.restore_layout)
    return Layout(transpile(routed.circuit), cmap.n_physical, routed.initial, routed.final, routed.swaps)


def build_noise(
    section: NoiseSection,
    layout: Layout,
    n_logical: int,
    seed: int,
    p: float | None = None,
    targets=None,
) -> NoiseModel | None:
    kind = "depolarizing" if p is not None else section.kind
    if kind == "none":
        return None
    logical = named_targets(section.targets if targets is None else targets, n_logical)
    phys = layout.physical(logical)
    if kind == "depolarizing":
        return depolarizing_noise_model(section.p if p is None else p, layout.n_physical, phys)
    times = sample_qubit_times(
        layout.n_physical, seed, section.t1_mean, section.t1_sd, section.t2_mean, section.t2_sd
    )
    try:
        return build_noise_model(times, phys, section.scale, section.durations, section.depolarizing)
    except ValueError as err:
        raise ConfigError("noise", str(err)) from None


# --- runners -----------------------------------------------------------------


@dataclass
class CellResult:
    energy: float
    corr: float
    parameters: list[float]
    trace: ConvergenceTrace | None = None
    info: dict = field(default_factory=dict)


def _seed_streams(master: int, cell_seed: int) -> dict[str, int]:
    base = derive_seed(master, cell_seed)
    return {name: derive_seed(base, k) for k, name in enumerate(("optimizer", "initial", "noise", "backend"))}


def optimize_noiseless(problem: Problem, cfg: ExperimentConfig, streams: dict, on_record=None) -> ConvergenceTrace:
    x0 = initial_parameters(cfg.ansatz, problem.circuit.num_parameters, streams["initial"])
    backend = Backend(cfg.backend.kind, cfg.backend.shots) if cfg.backend.kind == "sampled" else Backend()
    run = VqeRun(
        problem.hamiltonian,
        problem.circuit,
        backend,
        optimizer_config(cfg.optimizer, streams["optimizer"]),
        x0,
        seed=streams["backend"],
    )
    return run_vqe(run, on_record)


def noiseless_values(problem: Problem, params) -> tuple[float, float]:
    from .simulator import CompiledCircuit

    psi = CompiledCircuit(problem.circuit).state(params)
    return (
        float(expectation(problem.hamiltonian, psi).real),
        float(expectation(problem.correlation_operator, psi).real),
    )


def noisy_values(problem: Problem, layout: Layout, noise: NoiseModel, params) -> tuple[float, float]:
    from .simulator import run_density

    rho = run_density(layout.circuit, params, noise, lower=False)
    return (
        float(expectation(layout.observable(problem.hamiltonian), rho).real),
        float(expectation(layout.observable(problem.correlation_operator), rho).real),
    )


def run_cell(
    problem: Problem,
    cfg: ExperimentConfig,
    cell_seed: int,
    noise_p: float | None = None,
    noise_targets=None,
    placement=None,
    on_record=None,
    optimum: ConvergenceTrace | None = None,
) -> CellResult:
    """One deterministic (configuration, seed) evaluation."""
    streams = _seed_streams(cfg.seed, cell_seed)
    noisy = noise_p is not None or cfg.noise.kind != "none"
    if noisy:
        layout = build_layout(problem, cfg.topology, placement)
        noise_seed = streams["noise"] if cfg.noise.seed is None else derive_seed(cfg.noise.seed, cell_seed)
        noise = build_noise(cfg.noise, layout, problem.n_qubits, noise_seed, noise_p, noise_targets)
        info = {"native_gates": len(layout.circuit.gates), "swaps": layout.swaps, "mapping": list(layout.initial)}
        if cfg.noise.protocol == "optimize":
            x0 = initial_parameters(cfg.ansatz, problem.circuit.num_parameters, streams["initial"])
            run = VqeRun(
                layout.observable(problem.hamiltonian),
                layout.circuit,
                Backend("density", noise=noise),
                optimizer_config(cfg.optimizer, streams["optimizer"]),
                x0,
                seed=streams["backend"],
            )
            trace = run_vqe(run, on_record)
            e, corr = noisy_values(problem, layout, noise, trace.parameters)
            return CellResult(e, corr, trace.parameters, trace, info)
        trace = optimum or optimize_noiseless(problem, cfg, streams)
        e, corr = noisy_values(problem, layout, noise, trace.parameters)
        return CellResult(e, corr, trace.parameters, trace, info)
    trace = optimum or optimize_noiseless(problem, cfg, streams, on_record)
    e, corr = noiseless_values(problem, trace.parameters)
    return CellResult(trace.energy, corr, trace.parameters, trace, {"noiseless_energy": e})


def _deviation(value: float, reference: float) -> tuple[float, float]:
    try:
        return deviation_metrics(value, reference)
    except ZeroReference:
        return abs(value - reference), float("nan")


def _sweep_value_label(value) -> str:
    if isinstance(value, list):
        return "+".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_sweep(cfg: ExperimentConfig, base_dir: Path, threads: int = 1) -> tuple[list[dict], dict]:
    """Rows for every (value, seed) cell plus summary statistics."""
    if cfg.sweep is None:
        raise ConfigError("sweep", "a sweep section is required")
    sw = cfg.sweep
    var = sw.variable
    if var == "depolarizing_p":
        for k, v in enumerate(sw.values):
            if not isinstance(v, (int, float)) or not 0 < v <= 1:
                raise ConfigError(f"sweep.values.{k}", "depolarizing rates must lie in (0, 1]")
    if var == "onsite_u":
        for k, v in enumerate(sw.values):
            if not isinstance(v, (int, float)):
                raise ConfigError(f"sweep.values.{k}", "onsite U values are numbers in eV")
    if var in ("placement", "ansatz"):
        for k, v in enumerate(sw.values):
            if not isinstance(v, str) or (var == "ansatz" and v not in FAMILIES):
                raise ConfigError(f"sweep.values.{k}", f"invalid {var} value {v!r}")
    if var == "targets" and cfg.noise.kind == "none":
        raise ConfigError("noise.kind", "a targets sweep needs a noise model")

    problems: dict[Any, Problem] = {}
    optima: dict[Any, ConvergenceTrace] = {}

    def problem_for(value) -> Problem:
        key = (var, _sweep_value_label(value)) if var in ("onsite_u", "ansatz") else None
        if key not in problems:
            problems[key] = build_problem(
                cfg,
                base_dir,
                family=value if var == "ansatz" else None,
                onsite_u_ev=float(value) if var == "onsite_u" else None,
            )
        return problems[key]

    cells = [(i, v, s) for i, v in enumerate(sw.values) for s in sw.seeds]
    # the noiseless optimum does not depend on noise-only sweep values; share it
    shared_optimum = cfg.noise.protocol == "reevaluate" and cfg.optimizer.kind != "SPSA" and cfg.ansatz.initial == "zeros"
    noisy_cells = var == "depolarizing_p" or cfg.noise.kind != "none"
    needs_optimum = not (noisy_cells and cfg.noise.protocol == "optimize")
    for _, v, s in cells:
        p = problem_for(v)
        key = (id(p), s if not shared_optimum else None)
        if needs_optimum and key not in optima:
            optima[key] = optimize_noiseless(p, cfg, _seed_streams(cfg.seed, s))

    def one(cell):
        i, v, s = cell
        p = problem_for(v)
        opt = optima.get((id(p), s if not shared_optimum else None))
        kwargs = {}
        if var == "depolarizing_p":
            kwargs["noise_p"] = float(v)
        elif var == "targets":
            kwargs["noise_targets"] = v
        elif var == "placement":
            kwargs["placement"] = v
        res = run_cell(p, cfg, s, optimum=opt, **kwargs)
        e_abs, e_pct = _deviation(res.energy, p.e0)
        _, c_pct = _deviation(res.corr, p.corr0)
        return i, {
            "sweep_name": var,
            "sweep_value": _sweep_value_label(v),
            "seed": s,
            "energy_hartree": res.energy,
            "energy_dev_abs": e_abs,
            "energy_dev_pct": e_pct,
            "corr": res.corr,
            "corr_dev_pct": c_pct,
        }, res.info

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(one, cells))
    else:
        out = [one(c) for c in cells]
    out.sort(key=lambda t: (t[0], t[1]["seed"]))
    rows = [r for _, r, _ in out]

    summary: dict[str, Any] = {"cells": len(rows), "means": {}, "cell_info": []}
    for i, v in enumerate(sw.values):
        sel = [r for (j, r, _) in out if j == i]
        label = _sweep_value_label(v)
        summary["means"][label] = {
            "energy_dev_abs": float(np.mean([r["energy_dev_abs"] for r in sel])),
            "energy_dev_pct": float(np.mean([r["energy_dev_pct"] for r in sel])),
            "corr_dev_pct": float(np.mean([r["corr_dev_pct"] for r in sel])),
        }
    summary["cell_info"] = [dict(info, sweep_value=r["sweep_value"], seed=r["seed"]) for _, r, info in out]
    refs = {}
    for key, p in problems.items():
        label = "default" if key is None else key[1]
        refs[label] = {"exact_energy": p.e0, "exact_corr": p.corr0, "reference": list(p.reference)}
    summary["exact"] = refs
    if var == "depolarizing_p":
        pts = [(float(v), summary["means"][_sweep_value_label(v)]["energy_dev_abs"]) for v in sw.values]
        pts = [(x, y) for x, y in pts if y > 0]
        if len(pts) >= 2:
            fit = fit_loglog_slope(pts)
            summary["slope_fit"] = {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2, "n_points": fit.n_points}
        else:
            summary["slope_fit"] = None
    return rows, summary


def run_correlation(cfg: ExperimentConfig, base_dir: Path) -> list[dict]:
    """Rows (topology, ansatz, <Sz Sz>) with the exact row first."""
    sec = cfg.correlation or CorrelationSection()
    rows = []
    base = build_problem(cfg, base_dir, sites=sec.sites)
    if sec.include_exact:
        rows.append({"topology": "", "ansatz": "Exact", "szsz": base.corr0})
    problems: dict[str, Problem] = {}
    for k, row in enumerate(sec.rows):
        if row.ansatz not in problems:
            problems[row.ansatz] = build_problem(cfg, base_dir, family=row.ansatz, sites=sec.sites)
        p = problems[row.ansatz]
        if row.noisy and cfg.noise.kind == "none":
            raise ConfigError(f"correlation.rows.{k}.noisy", "noisy rows need a noise model")
        if row.noisy:
            res = run_cell(p, cfg, cfg.seed, placement=row.topology)
        else:
            trace = optimize_noiseless(p, cfg, _seed_streams(cfg.seed, cfg.seed))
            _, corr = noiseless_values(p, trace.parameters)
            res = CellResult(trace.energy, corr, trace.parameters, trace)
        rows.append({"topology": row.topology or "", "ansatz": row.ansatz, "szsz": res.corr})
    return rows


def run_jmodel(cfg: ExperimentConfig, threads: int = 1) -> dict:
    sec = cfg.jmodel or JModelSection()
    params = ClusterParameters(delta=sec.delta, t_pd=sec.t_pd, u_d=sec.u_d, u_p=sec.u_p)
    summary = monte_carlo_j(params, sec.amplitude, sec.source, sec.n_samples, cfg.seed, threads)
    out = summary.to_dict(include_samples=True)
    out["j"] = exchange_coupling_up0(params)
    return out


# --- persistence -------------------------------------------------------------


def provenance() -> str:
    return f"aimvqe {__version__}"


def result_envelope(cfg: ExperimentConfig, kind: str, **payload) -> dict:
    return {
        "experiment": cfg.id,
        "command": kind,
        "seed": cfg.seed,
        "config_hash": config_hash(cfg),
        "provenance": provenance(),
        "config": resolved_config(cfg),
        **payload,
    }


def write_json(path: Path, data: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_csv(path: Path, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: r[k] for k in columns})


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TraceWriter:
    """Streams trace rows to CSV as the optimizer produces them."""

    def __init__(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(TRACE_COLUMNS)

    def __call__(self, rec) -> None:
        self._w.writerow((rec.iteration, rec.energy, rec.evaluations, rec.wall_ms))
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def exact_summary(h: QubitOperator, name: str) -> dict:
    gs = exact_ground_state(h)
    return golden_record(name, h, gs)


def run_vqe_experiment(cfg: ExperimentConfig, base_dir: Path, out_dir: Path) -> dict:
    problem = build_problem(cfg, base_dir)
    writer = TraceWriter(out_dir / "trace.csv")
    try:
        if cfg.backend.kind == "density":
            if cfg.noise.kind == "none":
                raise ConfigError("noise.kind", "the density backend needs a noise model")
            cfg_opt = cfg.model_copy(update={"noise": cfg.noise.model_copy(update={"protocol": "optimize"})})
            res = run_cell(problem, cfg_opt, cfg.seed, on_record=writer)
        else:
            res = run_cell(problem, cfg.model_copy(update={"noise": NoiseSection()}), cfg.seed, on_record=writer)
    finally:
        writer.close()
    trace = res.trace
    rel = abs(res.energy - problem.e0) / abs(problem.e0) if problem.e0 else float("nan")
    counts = count_gates(problem.circuit)
    result = result_envelope(
        cfg,
        "vqe",
        trace_file="trace.csv",
        final={
            **trace.summary(),
            "energy": res.energy,
            "corr": res.corr,
            "reference": list(problem.reference),
            "n_parameters": problem.circuit.num_parameters,
        },
        golden={
            "exact_energy": problem.e0,
            "relative_error": rel,
            "exact_corr": problem.corr0,
        },
        gate_counts={"native": counts, "paper_comparison": compare_gate_counts(counts)},
        info=res.info,
    )
    write_json(out_dir / "result.json", result)
    return result
