"""Error types shared across the pipeline, mapped to CLI exit codes."""

from __future__ import annotations

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STREAM = 3
EXIT_OVERRUN = 4


class SonomotionError(Exception):
    """Base class; exit_code drives the CLI."""

    exit_code = 1


class ConfigError(SonomotionError):
    exit_code = EXIT_CONFIG


class TelemetryParseError(ConfigError):
    """Malformed telemetry record; message names the offending field."""


class StreamOrderError(SonomotionError):
    """Timestamps out of order; carries both offending times."""

    exit_code = EXIT_STREAM

    def __init__(self, previous_t: float, current_t: float):
        super().__init__(
            f"out-of-order telemetry: t={current_t} after t={previous_t}"
        )
        self.previous_t = previous_t
        self.current_t = current_t


class StreamTimeout(SonomotionError):
    """Idle timeout on a live source; distinct from end-of-stream."""

    exit_code = EXIT_STREAM


class CapacityError(ConfigError):
    """Signal registry is full (16-channel ceiling)."""


class MappingError(ConfigError):
    """Event refers to a signal that was never registered."""


class OverrunError(SonomotionError):
    """Sink could not keep up; carries the number of dropped blocks."""

    exit_code = EXIT_OVERRUN

    def __init__(self, dropped_blocks: int):
        super().__init__(f"sink overrun: dropped {dropped_blocks} block(s)")
        self.dropped_blocks = dropped_blocks
