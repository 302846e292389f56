"""Exception types raised by the public surface.

Every failure mode has its own class so callers can discriminate without
parsing messages.  All inherit from ``RouError``; validation failures are
also ``ValueError`` so generic callers behave sensibly.
"""


class RouError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(RouError, ValueError):
    """Base class for rejected inputs."""


class NonFiniteInput(ValidationError):
    """A parameter that must be finite is nan or infinite."""

    def __init__(self, field: str, value: float):
        self.field = field
        super().__init__(f"{field} must be finite, got {value!r}")


class NonPositiveGamma(ValidationError):
    def __init__(self, value: float):
        self.field = "gamma"
        super().__init__(f"gamma (mean-reversion rate) must be > 0, got {value!r}")


class NonPositiveSigma(ValidationError):
    def __init__(self, value: float):
        self.field = "sigma"
        super().__init__(f"sigma (volatility) must be > 0, got {value!r}")


class NoBoundary(ValidationError):
    def __init__(self):
        super().__init__("at least one of lower/upper must be given")


class EmptyInterval(ValidationError):
    def __init__(self, lower: float, upper: float):
        super().__init__(f"need lower < upper, got [{lower!r}, {upper!r}]")


class DoublyReflectedUnsupported(RouError):
    """The requested closed form exists only for one-sided reflection."""

    def __init__(self, what: str = "this quantity"):
        super().__init__(
            f"{what} is not provided for a doubly reflected process; "
            "only the upper loss rate (doubly_loss_rate) is available"
        )


class NonPositiveWidth(ValidationError):
    def __init__(self, value: float):
        super().__init__(f"interval width d must be > 0, got {value!r}")


class OutOfSupport(ValidationError):
    def __init__(self, x: float, detail: str):
        super().__init__(f"x={x!r} outside the reflected support: {detail}")


class UnstableStep(ValidationError):
    def __init__(self, detail: str):
        super().__init__(detail)


class EmptySample(ValidationError):
    def __init__(self):
        super().__init__("need at least one sample")


class InsufficientSamples(ValidationError):
    def __init__(self, needed: int, got: int):
        super().__init__(f"need at least {needed} samples, got {got}")


class HorizonExceeded(ValidationError):
    def __init__(self, needed: float, horizon: float):
        super().__init__(
            f"evaluation requires the path up to t={needed!r}, "
            f"but the path horizon is {horizon!r}"
        )


class ConfigError(RouError, ValueError):
    """Bad experiment configuration (unknown key, wrong kind, missing field)."""


class WriteFailure(RouError, OSError):
    def __init__(self, path, cause):
        self.path = path
        super().__init__(f"cannot write report to {path}: {cause}")


class PathInvariantViolation(RouError, AssertionError):
    """A ReflectedPath failed validation."""
