"""Exceptions and the integer status codes used inside compiled kernels."""

OK = 0
DOMAIN = 1
SINGULAR = 2
NO_CONVERGENCE = 3
NONFINITE = 4

STATUS_NAMES = {
    OK: "ok",
    DOMAIN: "domain_violation",
    SINGULAR: "singular_matrix",
    NO_CONVERGENCE: "no_convergence",
    NONFINITE: "nonfinite_state",
}


class ConservoError(Exception):
    pass


class SingularMatrix(ConservoError, ArithmeticError):
    """A Gram matrix or multiplier lost rank beyond the pivot threshold."""


class NoConvergence(ConservoError, ArithmeticError):
    """Jacobi sweeps exceeded their cap."""


class DomainViolation(ConservoError, ValueError):
    """A state left the admissible domain of a system."""


class NonFiniteState(DomainViolation):
    """A stepper produced NaN or Inf."""


class InvalidParams(ConservoError, ValueError):
    pass


_BY_STATUS = {
    DOMAIN: DomainViolation,
    SINGULAR: SingularMatrix,
    NO_CONVERGENCE: NoConvergence,
    NONFINITE: NonFiniteState,
}


def raise_for_status(status, context=""):
    if status == OK:
        return
    exc = _BY_STATUS.get(int(status), ConservoError)
    msg = STATUS_NAMES.get(int(status), f"status {status}")
    raise exc(f"{msg}: {context}" if context else msg)
