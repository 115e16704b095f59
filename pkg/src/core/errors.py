"""Exception hierarchy. Each class maps to a CLI exit code."""


class SpinbinError(Exception):
    exit_code = 1


class ConfigError(SpinbinError):
    """Invalid or inconsistent configuration."""

    exit_code = 2


class ModelError(SpinbinError):
    """The physical model cannot be evaluated (truncation, non-contractive maps, mode mismatch)."""

    exit_code = 3


class StatisticsError(SpinbinError):
    """A statistic is undefined for the given data, or a fit failed."""

    exit_code = 4


class EventParseError(StatisticsError):
    """Malformed line in an event-stream file."""

    def __init__(self, line_number, message):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")
