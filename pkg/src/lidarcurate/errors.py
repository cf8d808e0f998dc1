"""Exception types raised by the parsers, filters and evaluator."""

from __future__ import annotations


class CurationError(Exception):
    """Base class for every error raised by :mod:`lidarcurate`."""

    _init_args: tuple = ()

    def __reduce__(self):
        # constructor arguments differ from ``args``; needed for worker pools
        return (type(self), self._init_args, self.__dict__)


class TruncatedRecord(CurationError, ValueError):
    """Binary point data whose length is not a whole number of records."""

    def __init__(self, length: int, record_size: int) -> None:
        self.length = length
        self.record_size = record_size
        self._init_args = (length, record_size)
        super().__init__(
            f"{length} bytes is not a multiple of the {record_size}-byte point record"
        )


class MalformedLine(CurationError, ValueError):
    """A text line that cannot be parsed. ``line_number`` is 1-based."""

    def __init__(self, line_number: int, reason: str = "") -> None:
        self.line_number = line_number
        self.reason = reason
        msg = f"line {line_number}: malformed"
        if reason:
            msg = f"{msg} ({reason})"
        self._init_args = (line_number, reason)
        super().__init__(msg)


class InvalidOcclusion(CurationError, ValueError):
    def __init__(self, value: object) -> None:
        self.value = value
        self._init_args = (value,)
        super().__init__(f"occlusion value {value!r} is outside 0-3")


class UnknownOcclusionName(CurationError, ValueError):
    def __init__(self, name: str) -> None:
        self.name = name
        self._init_args = (name,)
        super().__init__(f"unknown occlusion category {name!r}")


class NonPositiveDimension(CurationError, ValueError):
    def __init__(self, name: str, value: float) -> None:
        self.name = name
        self.value = value
        self._init_args = (name, value)
        super().__init__(f"box {name} must be positive and finite, got {value!r}")


class FrameMismatch(CurationError, ValueError):
    def __init__(self, expected: str, got: str) -> None:
        self.expected = expected
        self.got = got
        self._init_args = (expected, got)
        super().__init__(f"frame id mismatch: {expected!r} vs {got!r}")


class MissingScore(CurationError, ValueError):
    """A detection without a confidence score was handed to the evaluator."""

    def __init__(self, frame_id: str, index: int) -> None:
        self.frame_id = frame_id
        self.index = index
        self._init_args = (frame_id, index)
        super().__init__(f"detection {index} in frame {frame_id!r} has no score")


class NoGroundTruth(CurationError, ValueError):
    def __init__(self) -> None:
        super().__init__("average precision is undefined without ground truth")


class ConfigError(CurationError, ValueError):
    """Invalid configuration value or configuration file."""

    def __init__(self, message: str) -> None:
        self._init_args = (message,)
        super().__init__(message)


class FrameError(CurationError):
    """Wraps an I/O or parse failure with the frame it happened in."""

    def __init__(self, frame_id: str, cause: BaseException) -> None:
        self.frame_id = frame_id
        self.cause = cause
        self._init_args = (frame_id, cause)
        super().__init__(f"frame {frame_id!r}: {cause}")
