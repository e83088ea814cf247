"""Exception hierarchy shared by every olcb module."""


class OlcbError(Exception):
    """Base exception for olcb errors."""

    pass


class BodyValidationError(OlcbError):
    """A body violates one of its construction invariants.

    `index` points at the first offending vertex, halfspace or direction when known.
    """

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        if index is not None:
            message = f"{message} (index {index})"
        super().__init__(message)


class OriginNotInterior(BodyValidationError):
    """The origin is not an interior point of the body."""

    pass


class DegenerateBody(BodyValidationError):
    """The vertex set is affinely dependent, so the hull has no interior."""

    pass


class DimensionUnsupported(OlcbError):
    pass


class SingularMap(OlcbError):
    pass


class ZeroDirection(OlcbError):
    pass


class DomainError(OlcbError):
    """An argument lies outside the domain of the operation."""

    pass


class MonotonicityViolation(OlcbError):
    """A rearrangement tabulation increased beyond tolerance."""

    pass


class NonpositiveLambda(OlcbError):
    pass


class BracketFailure(OlcbError):
    """No bracket of Φ(λ) = 1 was found; the φ/ω pair is broken."""

    pass


class FunctionValidationError(OlcbError):
    """An Orlicz or weight function violates its defining properties."""

    pass


class BoundaryPoint(OlcbError):
    pass


class ConfigError(OlcbError):
    """Invalid experiment configuration."""

    pass
