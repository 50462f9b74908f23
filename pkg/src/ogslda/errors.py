"""Exception hierarchy shared across the package.

Two families matter to callers: ``DataError`` covers malformed or
inconsistent inputs (CLI exit code 2) and ``NumericalError`` covers failures
of the numerical kernels (CLI exit code 3). Everything derives from
``OgsldaError`` so library users can catch a single root type.
"""


class OgsldaError(Exception):
    """Base class for all errors raised by this package."""


class DataError(OgsldaError):
    """Malformed, inconsistent, or out-of-contract input data."""


class NumericalError(OgsldaError):
    """A numerical routine could not produce a trustworthy result."""


class ParseError(DataError):
    """A file could not be parsed; the message names the file and row."""


class DimensionMismatch(DataError):
    """Operands or dataset rows disagree in dimension."""


class VersionMismatch(DataError):
    """A serialized document carries an unsupported format version."""


class EmptyClass(DataError):
    """An operation requires samples from a class that has none."""


class OutOfBounds(DataError):
    """A window or feature does not fit inside its image."""


class ImageTooSmall(DataError):
    """An image is smaller than the detector base window."""


class SingularMatrix(NumericalError):
    """Elimination hit a pivot below the singularity threshold."""


class SingularScatter(NumericalError):
    """The within-class scatter stayed singular after regularization."""


class DegenerateUpdate(NumericalError):
    """A rank-two inverse update denominator is too close to zero."""


class DegenerateCandidate(NumericalError):
    """A candidate feature is linearly dependent on the selected set."""


class InsufficientRank(NumericalError):
    """Fewer non-degenerate features exist than were requested."""


class ZeroDenominator(NumericalError):
    """A ratio's denominator vanished (for example w'Sw w = 0)."""


class DomainError(NumericalError):
    """An argument lies outside the mathematical domain of a function."""


class NoRootBetweenMeans(NumericalError):
    """The equal-density quadratic has no root between the projected means.

    Callers fall back to the midpoint of the projected means; this class
    exists so that the condition can be signalled and logged explicitly.
    """


class GoalUnreachable(NumericalError):
    """A cascade stage hit its learner cap without meeting the node goal."""

    def __init__(self, message, detection_rate, fp_rate, learners):
        super().__init__(message)
        self.detection_rate = detection_rate
        self.fp_rate = fp_rate
        self.learners = learners


class PoolExhausted(OgsldaError):
    """The negative pool yielded no windows; cascade training should stop."""
