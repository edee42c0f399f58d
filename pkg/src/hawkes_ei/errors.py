"""Exception hierarchy shared by all modules."""


class HawkesEIError(Exception):
    """Base class for every error raised by this package."""


class ParamError(HawkesEIError, ValueError):
    """Invalid model parameters."""


class SignViolation(ParamError):
    def __init__(self, field, value, rule):
        self.field = field
        super().__init__(f"{field}={value!r} violates {rule}")


class NonPositiveRate(ParamError):
    def __init__(self, field, value):
        self.field = field
        super().__init__(f"{field}={value!r} must be > 0")


class LengthMismatch(ParamError):
    def __init__(self, field, got, expected):
        self.field = field
        super().__init__(f"{field} has {got} entries, expected {expected}")


class PreconditionError(HawkesEIError):
    """An operation was called outside its domain of validity."""


class AssumptionViolated(PreconditionError):
    pass


class NotDegenerate(PreconditionError):
    pass


class SingularC(PreconditionError):
    pass


class HorizonNonPositive(PreconditionError, ValueError):
    pass


class RuntimeFailure(HawkesEIError):
    """Failure discovered while running a computation."""


class ExplosionGuard(RuntimeFailure):
    def __init__(self, n_events, t):
        self.n_events = n_events
        self.t = t
        super().__init__(f"event cap of {n_events} reached at t={t:.6g}")


class DriftFailed(RuntimeFailure):
    pass


class SingularFit(RuntimeFailure):
    pass
