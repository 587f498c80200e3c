"""Exception hierarchy shared by all modules."""


class AimVqeError(Exception):
    """Base class for every error raised by this package."""


class OperatorSyntaxError(AimVqeError, ValueError):
    """Malformed Hamiltonian text. Carries a 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.reason = message


class EmptyInput(AimVqeError, ValueError):
    pass


class TooWide(AimVqeError, ValueError):
    pass


class WidthMismatch(AimVqeError, ValueError):
    pass


class IndexOutOfRange(AimVqeError, IndexError):
    pass


class DimensionMismatch(AimVqeError, ValueError):
    pass


class SameSite(AimVqeError, ValueError):
    pass


class SingularParameters(AimVqeError, ValueError):
    pass


class UnboundParameter(AimVqeError, KeyError):
    pass


class InvalidChannel(AimVqeError, ValueError):
    pass


class InvalidT2(InvalidChannel):
    pass


class ProbabilityOutOfRange(InvalidChannel):
    pass


class OddWidth(AimVqeError, ValueError):
    pass


class ElectronCountOutOfRange(AimVqeError, ValueError):
    pass


class DisconnectedMap(AimVqeError, ValueError):
    pass


class TooSmallMap(AimVqeError, ValueError):
    pass


class UnsupportedAnsatz(AimVqeError, ValueError):
    pass


class NoConvergence(AimVqeError, RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class InsufficientData(AimVqeError, ValueError):
    pass


class NonPositiveValue(AimVqeError, ValueError):
    pass


class ZeroReference(AimVqeError, ZeroDivisionError):
    pass


class ConfigError(AimVqeError, ValueError):
    """Invalid experiment configuration; ``field`` is a dotted path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
