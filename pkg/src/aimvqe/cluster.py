"""Three-site Cu2O cluster model: superexchange J and its sensitivity to noisy inputs.

All energies are in Hartree.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Literal

import numpy as np

from .errors import SingularParameters

Source = Literal["delta", "t_pd"]

# onsite energies and couplings quoted for the Hc core
PAPER_E_BATH = -0.0633
PAPER_E_IMP1 = -0.2842
PAPER_E_IMP2 = -0.2633
PAPER_U_D = 0.2934
PAPER_T_PD = 0.0578
PAPER_U_P = 0.0
PAPER_DELTA = 0.2104


@dataclass(frozen=True)
class ClusterParameters:
    delta: float
    t_pd: float
    u_d: float
    u_p: float = 0.0
    e_bath: float | None = None
    e_imp1: float | None = None
    e_imp2: float | None = None

    @classmethod
    def paper(cls) -> ClusterParameters:
        return cls(
            delta=PAPER_DELTA,
            t_pd=PAPER_T_PD,
            u_d=PAPER_U_D,
            u_p=PAPER_U_P,
            e_bath=PAPER_E_BATH,
            e_imp1=PAPER_E_IMP1,
            e_imp2=PAPER_E_IMP2,
        )


@dataclass(frozen=True)
class NoisySample:
    delta_perturbation: float
    source: str
    j_exact: float
    j_first_order: float


def derive_delta(e_bath: float, e_imp1: float, e_imp2: float) -> float:
    """Charge-transfer energy from onsite energies: bath minus impurity mean."""
    return e_bath - (e_imp1 + e_imp2) / 2


def _check(p: ClusterParameters, with_up: bool = True):
    if p.delta <= 0:
        raise SingularParameters(f"delta must be positive, got {p.delta}")
    if p.u_d <= 0:
        raise SingularParameters(f"u_d must be positive, got {p.u_d}")
    if with_up and p.delta + p.u_p / 2 <= 0:
        raise SingularParameters("delta + u_p/2 must be positive")


def exchange_coupling(p: ClusterParameters) -> float:
    """``J = 4 t^4 / Delta^2 * (1/U_d + 1/(Delta + U_p/2))``."""
    _check(p)
    return 4 * p.t_pd**4 / p.delta**2 * (1 / p.u_d + 1 / (p.delta + p.u_p / 2))


def exchange_coupling_up0(p: ClusterParameters) -> float:
    """The ``U_p = 0`` form, ``4 t^4 / Delta^2 * (1/U_d + 1/Delta)``; ignores ``p.u_p``."""
    _check(p, with_up=False)
    return 4 * p.t_pd**4 / p.delta**2 * (1 / p.u_d + 1 / p.delta)


def noisy_j_tpd_first_order(p: ClusterParameters, delta_perturbation: float) -> float:
    """J with ``(t + d)^4`` replaced by its first-order expansion ``t^4 + 4 t^3 d``.

    Evaluated literally; no clamping when ``d`` is large.
    """
    _check(p, with_up=False)
    t, d = p.t_pd, delta_perturbation
    return 4 * (t**4 + 4 * t**3 * d) / p.delta**2 * (1 / p.u_d + 1 / p.delta)


def noisy_j_delta_first_order(p: ClusterParameters, delta_perturbation: float) -> float:
    """J with ``1/(D+d)^2 ~ (1 - 2d/D)/D^2`` and ``1/(D+d) ~ 1/D - d/D^2``."""
    _check(p, with_up=False)
    D, d = p.delta, delta_perturbation
    return 4 * p.t_pd**4 / D**2 * (1 - 2 * d / D) * (1 / p.u_d + 1 / D - d / D**2)


def _perturbed(p: ClusterParameters, source: Source, d: float) -> ClusterParameters:
    if source == "delta":
        return replace(p, delta=p.delta + d)
    if source == "t_pd":
        return replace(p, t_pd=p.t_pd + d)
    raise ValueError(f"unknown noise source {source!r}")


def _first_order(p: ClusterParameters, source: Source, d: float) -> float:
    if source == "delta":
        return noisy_j_delta_first_order(p, d)
    return noisy_j_tpd_first_order(p, d)


@dataclass
class MonteCarloSummary:
    mean: float
    std: float
    mean_first_order: float
    std_first_order: float
    baseline: float
    n_requested: int
    n_excluded: int
    samples: list[NoisySample]

    @property
    def stderr(self) -> float:
        n = len(self.samples)
        return self.std / np.sqrt(n) if n else float("nan")

    def to_dict(self, include_samples: bool = False) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "samples"}
        out["n_used"] = len(self.samples)
        if include_samples:
            out["samples"] = [asdict(s) for s in self.samples]
        return out


def _draw(seed: int, index: int) -> float:
    # one stream per (seed, sample index): order-independent under parallelism
    return float(np.random.default_rng([seed, index]).standard_normal())


def monte_carlo_j(
    p: ClusterParameters,
    amplitude: float,
    source: Source,
    n_samples: int,
    seed: int,
    threads: int = 1,
) -> MonteCarloSummary:
    """Propagate ``param' = param + N(0,1) * amplitude`` through J.

    Each sample records the exact recomputation (U_p = 0 form, matching the
    first-order formulas) and the first-order value. Draws that make a
    denominator non-positive are excluded and counted.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    if source not in ("delta", "t_pd"):
        raise ValueError(f"unknown noise source {source!r}")
    baseline = exchange_coupling_up0(p)

    def one(i: int) -> NoisySample | None:
        d = _draw(seed, i) * amplitude
        try:
            return NoisySample(
                delta_perturbation=d,
                source=source,
                j_exact=exchange_coupling_up0(_perturbed(p, source, d)),
                j_first_order=_first_order(p, source, d),
            )
        except SingularParameters:
            return None

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, range(n_samples)))
    else:
        results = [one(i) for i in range(n_samples)]
    samples = [s for s in results if s is not None]
    exact = np.array([s.j_exact for s in samples])
    first = np.array([s.j_first_order for s in samples])
    return MonteCarloSummary(
        mean=float(exact.mean()) if len(exact) else float("nan"),
        std=float(exact.std()) if len(exact) else float("nan"),
        mean_first_order=float(first.mean()) if len(first) else float("nan"),
        std_first_order=float(first.std()) if len(first) else float("nan"),
        baseline=baseline,
        n_requested=n_samples,
        n_excluded=n_samples - len(samples),
        samples=samples,
    )


def second_order_mean(p: ClusterParameters, amplitude: float, source: Source, h: float = 1e-4) -> float:
    """``J + J''/2 * amplitude^2``, the mean of J under small Gaussian noise."""
    j0 = exchange_coupling_up0(p)
    jp = exchange_coupling_up0(_perturbed(p, source, h))
    jm = exchange_coupling_up0(_perturbed(p, source, -h))
    return j0 + 0.5 * (jp - 2 * j0 + jm) / h**2 * amplitude**2
