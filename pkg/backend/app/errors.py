"""Exception hierarchy shared by the services, the CLI and the HTTP routers."""

from __future__ import annotations


class HankelpertError(Exception):
    """Root of every error raised by the package."""


# ---------- Validation ----------

class InputError(HankelpertError, ValueError):
    """Invalid arguments, malformed specs or unreadable files."""


class SeriesRangeError(InputError):
    """A generated series would leave the floating-point range."""

    def __init__(self, message: str, max_safe_n: int):
        super().__init__(message)
        self.max_safe_n = max_safe_n


class NonHankelError(InputError):
    """Matrix passed where a Hankel matrix is required."""


# ---------- Numerical preconditions ----------

class NumericalPreconditionError(HankelpertError, ArithmeticError):
    """A numerical precondition (radius, gap, rank) does not hold."""

    precondition = "numerical precondition"

    def __init__(self, message: str, precondition: str | None = None):
        super().__init__(message)
        if precondition is not None:
            self.precondition = precondition


class DegenerateRankError(NumericalPreconditionError):
    precondition = "rank"


class AmbiguousSubspaceError(NumericalPreconditionError):
    precondition = "singular-value gap"


class RadiusError(NumericalPreconditionError):
    precondition = "perturbation radius"


class SingularSystemError(NumericalPreconditionError):
    precondition = "invertibility"


def exit_code_for(exc: BaseException) -> int:
    """Exit status used by the command line for ``exc``."""

    if isinstance(exc, NumericalPreconditionError):
        return 2
    return 1
