"""Exception types shared across the package."""


class DaracError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(DaracError, ValueError):
    """Array shapes or coordinates do not agree."""


class DomainError(DaracError, ValueError):
    """A value lies outside the set a function is defined on."""


class ContractError(DaracError, ValueError):
    """A caller broke a documented precondition."""


class BatchCompositionError(ContractError):
    """A metric-learning batch lacks positives or negatives for some sample."""

    def __init__(self, index: int, missing: str):
        self.index = index
        self.missing = missing
        super().__init__(f"sample {index} has no {missing} in the batch")


class ProtocolError(DaracError, ValueError):
    """A retrieval protocol references unknown or inconsistent names."""


class FormatError(DaracError, ValueError):
    """A file on disk does not match its expected layout."""
