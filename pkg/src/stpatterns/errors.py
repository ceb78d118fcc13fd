"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An argument broke the documented precondition of an operation."""


class CapacityError(ContractViolation):
    """The requested exhaustive computation exceeds the supported size."""


class EnsembleFormatError(ValueError):
    """An ensemble cache file is malformed, truncated or incompatible."""


class ChecksumError(EnsembleFormatError):
    pass
