"""Exception taxonomy shared across the package."""


class StartLabError(Exception):
    """Base class for all startlab errors."""


class InvalidRangeError(StartLabError):
    """Foreperiod range has min >= max."""


class NegativeCompensationError(StartLabError):
    """Device latency exceeds the measured reaction time."""


class UnknownDeviceError(StartLabError):
    """Device id not present in the session registry."""


class DuplicateDeviceError(StartLabError):
    """Device id registered twice in one session."""


class PressBeforeStartError(StartLabError):
    """Button press observed before the start command (anticipation)."""


class NoOnsetError(StartLabError):
    """Force trace never crosses the onset threshold."""


class TraceTooShortError(StartLabError):
    """Force trace shorter than the baseline window."""


class IllegalTransitionError(StartLabError):
    """Start-phase command not allowed from the current phase."""


class NoStartChannelError(StartLabError):
    """Start fired with no configured output channel."""


class TooFewSamplesError(StartLabError):
    """Sample set below the minimum n for the requested test."""


class TooFewGroupsError(StartLabError):
    """Multiple-comparison procedure needs at least two groups."""


class LikertRangeError(StartLabError):
    """Likert response outside the 1..7 scale."""


class InvalidConfigError(StartLabError):
    """Session config failed schema or semantic validation."""


class SchemaViolationError(StartLabError):
    """Log record violates the record schema."""


class CorruptLineError(StartLabError):
    """Log line failed to parse.

    Carries the 1-based line number in ``line_no``.
    """

    def __init__(self, line_no: int, message: str = "") -> None:
        self.line_no = line_no
        super().__init__(message or f"corrupt log line {line_no}")


class RetryRejectedError(StartLabError):
    """Retry mark refused: wrong target, double mark, or trial in progress."""


class UnknownSessionError(StartLabError):
    """Session id not registered with the control service."""


class SessionClosedError(StartLabError):
    """Command issued to a session that already completed."""


class DegenerateGroupWarning(UserWarning):
    """Outlier screen hit a zero-variance group; nothing excluded there."""
