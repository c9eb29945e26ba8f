"""Exception types shared across the package."""


class GapforgeError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(GapforgeError):
    """Malformed instance/circuit/family text. Carries a 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedInstanceError(GapforgeError):
    """Instance violates a structural invariant (index range, table size, ...)."""


class ResourceCapError(GapforgeError):
    """An operation would exceed a configured resource cap."""


class InfeasibleParametersError(GapforgeError):
    """No construction satisfies the requested parameters within the caps."""


class IterationCapError(GapforgeError):
    """Iterative method did not converge. Carries the last estimate."""

    def __init__(self, message: str, last_estimate: float):
        self.last_estimate = last_estimate
        super().__init__(f"{message} (last estimate {last_estimate!r})")


class MissingCertificateError(GapforgeError):
    """Transform requested without a goodness certificate or an explicit waiver."""


class ShapeMismatchError(GapforgeError):
    """Proof/layer/assignment shape does not match the target object."""
