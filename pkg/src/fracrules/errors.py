"""Exception types shared across the package."""


class FracRulesError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(FracRulesError):
    """Source text does not conform to the function DSL.

    Carries the 0-based position of the offending token in ``position``.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DomainError(FracRulesError):
    """Argument outside the mathematical domain of an operation."""


class ContinuityError(FracRulesError):
    """A piecewise construction is discontinuous at a breakpoint."""

    def __init__(self, breakpoint_: float, mismatch: float):
        super().__init__(
            f"pieces disagree at breakpoint {breakpoint_!r} by {mismatch:.3e}"
        )
        self.breakpoint = breakpoint_
        self.mismatch = mismatch


class NotRepresentableError(FracRulesError):
    """Function does not flatten to a shifted-power sum (symbolic path only)."""


class StepCollisionError(FracRulesError):
    """A finite-difference stencil would cross a breakpoint."""
