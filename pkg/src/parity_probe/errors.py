"""Exception hierarchy shared across the package."""


class ParityProbeError(Exception):
    """Base class for all errors raised by parity_probe."""


class DataError(ParityProbeError):
    """Input data is malformed or insufficient for the requested analysis."""


class IngestError(DataError):
    """A CSV row could not be turned into a decision record."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class UndefinedRatioError(DataError):
    """The reference group's rate is zero, so a rate ratio does not exist."""


class EmptyStratumError(DataError):
    """A ground-truth stratum needed for equalized odds has no records."""

    def __init__(self, group: str, stratum: int):
        self.group = group
        self.stratum = stratum
        super().__init__(f"group {group!r} has no records with truth={stratum}")


class DegenerateVarianceError(ParityProbeError):
    """The test statistic's standard error is zero; the test is undefined."""


class UnreachableTargetError(ParityProbeError):
    """A power solver cannot reach the requested type-2 error."""


class SizeGuardError(ParityProbeError):
    """Exact enumeration was requested for groups that are too large."""
