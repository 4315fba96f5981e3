"""Exception types shared across the package."""


class DistfixError(Exception):
    pass


class DomainMismatchError(DistfixError):
    """Two distributions live on different domain sizes."""


class ParameterError(DistfixError):
    """A parameter is outside its admissible range."""


class CapabilityError(DistfixError):
    """An access object lacks the oracle capability an algorithm needs."""


class OutOfRegimeError(DistfixError):
    """Parameters fall outside the regime in which the guarantee holds."""


class PromiseViolationError(DistfixError):
    """The input provably violates the closeness promise it was sold under."""


class InsufficientSamplesError(DistfixError):
    """The draw budget is smaller than the count the guarantee requires."""

    def __init__(self, required, available):
        super().__init__(
            f"need {required} draws but only {available} are available"
        )
        self.required = required
        self.available = available


class OverlapError(DistfixError):
    """Two intervals that the correction formula assumes disjoint overlap."""
