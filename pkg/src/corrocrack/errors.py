"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: configuration problems exit with 1,
numerical failures with 2 and I/O failures with 3.
"""


class CorroCrackError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 2


class ConfigError(CorroCrackError, ValueError):
    """Invalid geometry, material data or configuration file."""

    exit_code = 1


class DomainError(CorroCrackError, ValueError):
    """A function was called outside of its mathematical domain."""

    exit_code = 2


class NumericalError(CorroCrackError, ArithmeticError):
    """A numerical procedure failed (negative concentrations, no convergence)."""

    exit_code = 2


class SolverError(NumericalError):
    """A linear solve broke down or did not reach its residual tolerance."""


class MeshError(NumericalError):
    """The mesh generator produced an invalid triangulation."""


class StepRejected(NumericalError):
    """A time step must be retried with a smaller increment."""


class FitError(CorroCrackError, ValueError):
    """A least-squares fit could not be performed."""

    exit_code = 2


class OutputError(CorroCrackError, OSError):
    """Writing results to disk failed."""

    exit_code = 3
