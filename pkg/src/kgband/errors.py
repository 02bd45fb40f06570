"""Exception hierarchy shared by all kgband modules."""


class KgbandError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(KgbandError, ValueError):
    """Array shapes do not line up."""


class DomainError(KgbandError, ValueError):
    """Input lies outside the domain of a physical model (e.g. non-positive distance)."""


class ConfigError(KgbandError, ValueError):
    """Invalid experiment or scenario configuration."""


class NumericalError(KgbandError, ArithmeticError):
    """Base for failures of a numerical routine."""


class NumericalDegeneracyError(NumericalError):
    """A covariance or innovation term lost positive (semi-)definiteness."""


class RankDeficiencyError(NumericalError):
    """A least-squares system has no unique solution."""


class InsufficientAnchorsError(KgbandError, ValueError):
    """Fewer transmitters than multilateration needs."""


class ConvergenceError(NumericalError):
    """An iterative solver ran out of iterations."""


class InsufficientDataError(KgbandError, ValueError):
    """Too few samples to compute a statistic."""


class ParseError(KgbandError, ValueError):
    """Malformed input file. ``line`` is the 1-based offending line number."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)
