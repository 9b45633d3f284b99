"""Exception hierarchy.

Each class carries the process exit code the command-line runner uses when
the error escapes a run.
"""


class RadScatterError(Exception):
    exit_code = 1


class InvalidArgument(RadScatterError, ValueError):
    exit_code = 2


class ConfigInvalid(InvalidArgument):
    """Configuration failed validation; the message starts with the field path."""

    exit_code = 2


class InvalidField(InvalidArgument):
    pass


class DomainTooSmall(InvalidArgument):
    pass


class UnsupportedGrid(RadScatterError):
    exit_code = 9


class Unsupported(RadScatterError):
    exit_code = 9


class NonlinearityOverflow(RadScatterError, OverflowError):
    exit_code = 8


class HypothesisViolation(RadScatterError):
    exit_code = 3


class TrajectoryAbort(RadScatterError):
    """Evolution stopped early; ``trajectory`` holds everything recorded so far."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class BlowupSuspected(TrajectoryAbort):
    exit_code = 4


class BoundaryContamination(TrajectoryAbort):
    exit_code = 5


class ValidationFailure(RadScatterError):
    exit_code = 6


class NoGroundState(RadScatterError):
    exit_code = 7


class MissingGroundState(RadScatterError):
    exit_code = 7
