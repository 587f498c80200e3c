"""Exact-diagonalization oracle, spin correlations, deviations and slope fits."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import InsufficientData, NoConvergence, NonPositiveValue, TooWide, ZeroReference
from .fermion import SpinOrbitalIndexing, szsz_operator, total_number_operator
from .pauli import CompiledOperator, QubitOperator, expectation, to_matrix
from .states import StateVector

DENSE_CROSSOVER = 10
MAX_WIDTH = 16
DEGENERACY_TOL = 1e-10


@dataclass
class GroundStateResult:
    energy: float
    state: StateVector
    gap: float
    sector: float  # <N> of the returned ground state
    degenerate: bool
    residual: float
    method: str

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "gap": self.gap,
            "sector": self.sector,
            "degenerate": self.degenerate,
            "residual": self.residual,
            "method": self.method,
        }


def _fix_phase(v: np.ndarray) -> np.ndarray:
    # deterministic representative: largest amplitude real and positive
    k = int(np.argmax(np.abs(v) > np.abs(v).max() - 1e-12))
    return v * (abs(v[k]) / v[k])


def exact_ground_state(
    h: QubitOperator, n_qubits: int | None = None, tol: float = 1e-8, seed: int = 0
) -> GroundStateResult:
    """Lowest eigenpair of ``h``.

    Up to ten qubits a dense Hermitian eigendecomposition is used; wider
    operators go through ARPACK Lanczos on a matrix-free product with a
    seeded start vector.
    """
    n = h.num_qubits if n_qubits is None else n_qubits
    if n > MAX_WIDTH:
        raise TooWide(f"exact ground state limited to {MAX_WIDTH} qubits, got {n}")
    compiled = CompiledOperator(h, n)
    if n <= DENSE_CROSSOVER:
        w, v = np.linalg.eigh(to_matrix(h, n))
        energies, vec, method = w[:2], v[:, 0], "dense"
    else:
        dim = 1 << n
        op = LinearOperator((dim, dim), matvec=compiled.apply, dtype=complex)
        v0 = np.random.default_rng(seed).standard_normal(dim).astype(complex)
        try:
            w, v = eigsh(op, k=2, which="SA", v0=v0, tol=tol * 1e-3, maxiter=dim * 10)
        except ArpackNoConvergence as err:
            residual = float("nan")
            if len(err.eigenvalues):
                x = err.eigenvectors[:, 0]
                residual = float(np.linalg.norm(compiled.apply(x) - err.eigenvalues[0] * x))
            raise NoConvergence("Lanczos did not converge", residual) from None
        order = np.argsort(w)
        energies, vec, method = w[order], v[:, order[0]], "lanczos"
    vec = _fix_phase(vec / np.linalg.norm(vec))
    e0 = float(energies[0])
    residual = float(np.linalg.norm(compiled.apply(vec) - e0 * vec))
    if residual > tol:
        raise NoConvergence(f"ground-state residual {residual:.3e} exceeds {tol:.1e}", residual)
    gap = float(energies[1] - energies[0]) if len(energies) > 1 else float("inf")
    sector = float(expectation(total_number_operator(n), vec).real)
    return GroundStateResult(
        energy=e0,
        state=StateVector(vec),
        gap=max(gap, 0.0),
        sector=sector,
        degenerate=gap <= DEGENERACY_TOL,
        residual=residual,
        method=method,
    )


def sector_energies(h: QubitOperator) -> dict[int, float]:
    """Lowest energy in each particle-number sector (dense path only)."""
    n = h.num_qubits
    mat = to_matrix(h, n)
    counts = np.bitwise_count(np.arange(1 << n))
    out = {}
    for k in range(n + 1):
        sel = np.flatnonzero(counts == k)
        out[k] = float(np.linalg.eigvalsh(mat[np.ix_(sel, sel)])[0])
    return out


def measure_correlation(state, i: int, j: int, indexing: SpinOrbitalIndexing) -> float:
    """``<S_z[i] S_z[j]>`` on a state vector or density matrix."""
    value = expectation(szsz_operator(i, j, indexing), state)
    return float(value.real)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float
    n_points: int


def fit_loglog_slope(points) -> SlopeFit:
    """Least-squares line through ``(log x, log y)``."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 2:
        raise InsufficientData(f"need at least 2 points, got {len(pts)}")
    for x, y in pts:
        if not (x > 0 and y > 0):
            raise NonPositiveValue(f"log-log fit needs positive values, got ({x}, {y})")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), r2, len(pts))


def deviation_metrics(noisy_value: float, reference_value: float) -> tuple[float, float]:
    """``(|noisy - ref|, 100 |noisy - ref| / |ref|)``."""
    diff = abs(noisy_value - reference_value)
    if reference_value == 0:
        raise ZeroReference("percent deviation undefined for a zero reference")
    return diff, 100.0 * diff / abs(reference_value)


def golden_record(name: str, h: QubitOperator, result: GroundStateResult, tol: float = 1e-8) -> dict:
    return {
        "name": name,
        "n_qubits": h.num_qubits,
        "n_terms": len(h),
        "energy": result.energy,
        "energy_repr": repr(result.energy),
        "gap": result.gap,
        "sector": result.sector,
        "provenance": {
            "oracle": result.method,
            "tolerance": tol,
            "residual": result.residual,
            "date": date.today().isoformat(),
        },
    }


def write_golden(path, records: dict) -> None:
    Path(path).write_text(json.dumps(records, indent=2, sort_keys=True) + "\n")


def load_golden(path) -> dict:
    return json.loads(Path(path).read_text())


def relative_error(value: float, reference: float) -> float:
    if reference == 0:
        raise ZeroReference("relative error undefined for a zero reference")
    return abs(value - reference) / abs(reference)


def is_finite(x: float) -> bool:
    return math.isfinite(x)
