"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An argument broke a documented precondition (shape, range, dimension)."""


class DataError(RuntimeError):
    """Input data is missing, incomplete or unusable."""


class MissingDataError(DataError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(f"measurement record is missing input pairs: {self.missing}")


class DegradedSignalError(DataError):
    """A fringe spectrum has no single dominant tone."""


class IllConditionedError(DataError):
    """Entries needed for an extraction are too small to carry phase information."""


class FitError(RuntimeError):
    """A fit failed to converge; ``diagnostics`` holds whatever was learned."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
