"""Exception hierarchy shared by every module of the package."""


class KompaneetsError(Exception):
    """Base class for all errors raised by this package."""


class InvalidMeshSpec(KompaneetsError, ValueError):
    pass


class OutOfDomain(KompaneetsError, ValueError):
    pass


class NegativeEnergy(KompaneetsError, ValueError):
    pass


class NegativeDensity(KompaneetsError, ValueError):
    pass


class LengthMismatch(KompaneetsError, ValueError):
    pass


class TargetTooLarge(KompaneetsError, ValueError):
    pass


class TargetNonpositive(KompaneetsError, ValueError):
    pass


class SlopeNotSupercritical(KompaneetsError, ValueError):
    pass


class NonpositiveTime(KompaneetsError, ValueError):
    pass


class IndexOutOfRange(KompaneetsError, IndexError):
    pass


class ZeroPivot(KompaneetsError, ArithmeticError):
    pass


class SolveFailure(KompaneetsError, ArithmeticError):
    pass


class NonFiniteState(KompaneetsError, ArithmeticError):
    """The state contains NaN or Inf; usually the time step is too large."""


class BadParams(KompaneetsError, ValueError):
    pass


class StepError(KompaneetsError):
    """A stepper failure annotated with the step index and time."""

    def __init__(self, step, time, cause):
        self.step = step
        self.time = time
        self.cause = cause
        super().__init__(f"step {step} (t={time:.6g}): {type(cause).__name__}: {cause}")


class EmptyRecord(KompaneetsError, ValueError):
    pass


class MissingSeries(KompaneetsError, ValueError):
    pass


class MissingSnapshots(KompaneetsError, ValueError):
    pass


class MismatchedRuns(KompaneetsError, ValueError):
    pass


class InitialOrderViolated(KompaneetsError, ValueError):
    pass


class ZeroMass(KompaneetsError, ValueError):
    pass


class ParseError(KompaneetsError, ValueError):
    pass


class SchemaError(KompaneetsError, ValueError):
    pass
