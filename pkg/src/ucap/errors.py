"""Exception hierarchy for dispatch, analysis, and study errors."""


class UcapError(Exception):
    """Base class for all errors raised by this package."""


class PreconditionViolation(UcapError):
    """An operation was called with arguments outside its contract."""


class NegativeSignal(UcapError):
    """A non-negative power trace was required but negative values were found."""


class NegativeRequest(UcapError):
    """A discharge operation received a negative power request."""


class PositiveRequest(UcapError):
    """A charging operation received a positive power request."""


class GapExceedsEnergy(UcapError):
    """Requested shave target exceeds the total energy of the trace."""


class UnknownPolicy(UcapError):
    """Policy name does not match any registered dispatch policy."""


class StreamingNonCausal(UcapError):
    """Policy needs the full reference up front and cannot run step by step."""


class DegenerateRates(UcapError):
    """Generator failure or repair process is too fast for an hourly model."""


class LengthMismatch(UcapError):
    """Input traces do not share a common length."""


class ConfigInvalid(UcapError):
    """Study or fleet configuration failed validation."""


class TraceFormat(UcapError):
    """A trace CSV file is malformed."""


class TooFewSamples(UcapError):
    """Not enough samples to form a confidence interval."""
