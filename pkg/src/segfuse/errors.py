"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to:
2 for unreadable input files, 3 for invariant violations, 4 for scorer
failures, 1 for anything else.
"""


class SegfuseError(Exception):
    exit_code = 1


class ParseError(SegfuseError):
    """Input file could not be parsed."""

    exit_code = 2

    def __init__(self, message, path=None, line=None, offset=None):
        self.path = path
        self.line = line
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class BadMagic(ParseError):
    pass


class TruncatedData(ParseError):
    pass


class MaxvalUnsupported(ParseError):
    pass


class InvariantViolation(SegfuseError):
    exit_code = 3


class DimensionMismatch(InvariantViolation):
    pass


class EmptyMask(InvariantViolation):
    pass


class InvalidRle(InvariantViolation):
    pass


class LengthMismatch(InvalidRle):
    pass


class NegativeCount(InvalidRle):
    pass


class ZeroLengthRun(InvalidRle):
    pass


class RleLengthMismatch(LengthMismatch):
    pass


class DanglingImageRef(InvariantViolation):
    pass


class ScoreOutOfRange(InvariantViolation):
    pass


class MissingScoreMap(InvariantViolation):
    pass


class ZeroImages(InvariantViolation):
    pass


class EmptyTable(InvariantViolation):
    pass


class InvalidConfig(InvariantViolation):
    pass


class WindowLargerThanImage(InvalidConfig):
    pass


class EmptyVisibleMask(InvariantViolation):
    pass


class PlacementFailure(InvariantViolation):
    pass


class SeparationTooSmall(InvariantViolation):
    pass


class ScorerFailure(SegfuseError):
    exit_code = 4


class IoFailure(SegfuseError):
    exit_code = 1
