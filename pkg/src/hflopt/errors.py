"""Exception types shared across the package."""


class HFLError(Exception):
    """Base class for all package errors."""


class InvalidInputError(HFLError, ValueError):
    """An argument violates a documented invariant."""


class InfiniteDelayError(HFLError):
    """A computation would never finish (e.g. zero CPU frequency)."""


class InfeasibleRateError(HFLError):
    """Upload attempted over a link with non-positive rate."""


class DivergenceError(HFLError):
    """Gradient descent blew up."""


class SchemaError(HFLError):
    """A serialized document does not match the expected schema/version."""
