"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`LarvestError`
so callers (notably the CLI) can map families of failures to exit codes.
"""


class LarvestError(Exception):
    """Base class for all package errors."""


# -- ingestion / validation ------------------------------------------------

class ParseError(LarvestError):
    """Input text could not be turned into a domain object."""


class MalformedRow(ParseError):
    pass


class EmptyDataset(ParseError):
    pass


class DuplicateHeaderMismatch(ParseError):
    """Header row missing or not the expected column list."""


class InvariantViolation(ParseError):
    pass


class NonMonotoneTime(ParseError):
    pass


class TooFewSamples(ParseError):
    pass


class ProfileCoverageGap(LarvestError):
    pass


class BadTimeOrder(LarvestError):
    pass


# -- fitting ----------------------------------------------------------------

class FitError(LarvestError):
    """Failure while estimating curves, warps or the temperature field."""


class DegenerateDesign(FitError):
    pass


class SingularSystem(FitError):
    pass


class BoundaryMaximum(FitError):
    def __init__(self, message, temperature_c=None):
        super().__init__(message)
        self.temperature_c = temperature_c


class MonotonicityViolation(FitError):
    pass


class OutOfRange(LarvestError):
    pass


class EmptyWindow(FitError):
    pass


class NonMonotoneBlend(FitError):
    pass


class BelowThreshold(LarvestError):
    pass


# -- dynamics / inference -----------------------------------------------------

class BranchOutOfRange(LarvestError):
    def __init__(self, message, lower=None, upper=None):
        super().__init__(message)
        self.lower = lower
        self.upper = upper


class InversionFailure(LarvestError):
    pass


class NoAdmissibleCandidate(LarvestError):
    pass


class VarianceUndefined(LarvestError):
    pass


class ZeroPosteriorMass(LarvestError):
    pass


class InsufficientSpan(LarvestError):
    pass
