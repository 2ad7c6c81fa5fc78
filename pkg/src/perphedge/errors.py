"""Exception hierarchy.

Every error raised on purpose by the package derives from ``PerpHedgeError``.
The intermediate classes group errors by the CLI exit code they map to.
"""


class PerpHedgeError(Exception):
    """Base class for all package errors."""


class ValidationError(PerpHedgeError, ValueError):
    """Invalid parameter or configuration value."""


class IngestionError(PerpHedgeError):
    """Input data could not be turned into a valid series."""


class EstimationError(PerpHedgeError):
    """A statistical estimate could not be formed from the data."""


class SolverError(PerpHedgeError):
    """The optimal hedge could not be computed."""


# ingestion / series handling
class MalformedRow(IngestionError):
    pass


class GapTooLarge(IngestionError):
    pass


class NonPositivePrice(IngestionError, ValidationError):
    pass


class NoOverlap(IngestionError):
    pass


class StepMismatch(IngestionError):
    pass


class HorizonTooLong(ValidationError):
    pass


class SeriesTooShort(EstimationError):
    pass


# estimation
class TooFewSamples(EstimationError):
    pass


class DegenerateSample(EstimationError):
    pass


class WindowTooShort(EstimationError):
    pass


class DegenerateBaseline(EstimationError):
    pass


# solver
class NonPositiveB(SolverError):
    pass


class NoRoot(SolverError):
    pass


# margining / metrics
class ClockAfterFunding(ValidationError):
    pass


class BadOrdering(ValidationError):
    pass


class DegenerateDenominator(ValidationError):
    pass
