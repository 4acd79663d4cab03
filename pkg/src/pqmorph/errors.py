"""Exception types shared across the package."""


class PqmorphError(Exception):
    """Base class for all package errors."""


class ExpressionBudgetExceeded(PqmorphError):
    """A symbolic computation grew past the configured node/term budget."""


class SyntaxErrorAt(PqmorphError):
    """DSL syntax error carrying the byte offset of the failure."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class SamplingFailed(PqmorphError):
    """No point satisfying the domain guards was found within the attempt budget."""


class BranchCutViolation(PqmorphError):
    """sqrt/log argument landed on the nonpositive real axis during evaluation."""


class DomainViolation(PqmorphError):
    """Evaluation left the real domain of a primitive (e.g. acos at |u| >= 1)."""


class MetricSingular(PqmorphError):
    """The metric determinant simplifies to literal zero."""


class DimensionMismatch(PqmorphError):
    """Operands live on charts of different dimension or metric."""


class MissingPartial(PqmorphError):
    """A required partial derivative was not supplied to the chain rule."""


class NonHolomorphicInput(PqmorphError):
    """A combination rule received a function outside the holomorphic fragment."""


class OddDimension(PqmorphError):
    """Inversion/duality requires an even chart dimension."""


class OrderTooLow(PqmorphError):
    """The jet order is too small for the requested derivative extraction."""


class UnknownId(PqmorphError):
    """No catalog entry with the requested id."""
