"""Variational-eigensolver laboratory for Anderson-impurity-model Hamiltonians."""

__version__ = "0.1.0"

from .errors import AimVqeError, ConfigError, NoConvergence, OperatorSyntaxError
from .pauli import PauliString, QubitOperator, expectation, load_operator, parse_operator, serialize_operator
from .spectral import exact_ground_state, fit_loglog_slope, measure_correlation

__all__ = [
    "AimVqeError",
    "ConfigError",
    "NoConvergence",
    "OperatorSyntaxError",
    "PauliString",
    "QubitOperator",
    "__version__",
    "exact_ground_state",
    "expectation",
    "fit_loglog_slope",
    "load_operator",
    "measure_correlation",
    "parse_operator",
    "serialize_operator",
]
