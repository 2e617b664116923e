"""Exception hierarchy shared by every module."""


class LyapflowError(Exception):
    """Base class for all library errors."""


class ContractViolation(LyapflowError, ValueError):
    """Arguments have incompatible shapes or violate a documented contract."""


class PreconditionError(LyapflowError, ValueError):
    """An input fails a checked precondition (e.g. operator not self-adjoint)."""


class CapabilityError(LyapflowError):
    """The system lacks a structure the operation needs (Hessian, symplectic form, ...)."""


class DegenerateContextError(LyapflowError, ValueError):
    """Projection machinery is undefined at this point (fixed point, vanishing gradient)."""


class NumericalFailure(LyapflowError, ArithmeticError):
    """Non-finite values, eigensolver failure or frame collapse during a computation."""


class RangeError(NumericalFailure):
    """Values left the floating point range; switch to a renormalizing method."""


class ConfigError(LyapflowError, ValueError):
    """Experiment configuration is invalid. ``errors`` lists every violation found."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
