"""Exception hierarchy shared across the package.

DataError subclasses map to CLI exit code 1, ConfigError to exit code 2.
"""


class SigverifyError(Exception):
    pass


class DataError(SigverifyError):
    pass


class ConfigError(SigverifyError):
    pass


class DegenerateCapture(DataError):
    """Capture with no usable spatial extent (a dot). Treated as failure to acquire."""


class TooShort(DataError):
    """Fewer samples than the curvature channel needs."""


class EmptySeries(DataError):
    pass


class InsufficientData(DataError):
    pass


class SingularCovariance(DataError):
    pass


class EmptySelection(DataError):
    """No feature passed the selection threshold; raise the threshold."""


class DimensionMismatch(DataError):
    pass


class EmptyScores(DataError):
    pass


class EmptyEnrollmentScores(EmptyScores):
    pass


class IncompleteScores(DataError):
    pass


class SessionTerminal(DataError):
    """Enrollment step attempted on a session already Enrolled or FailedToEnroll."""


class NotEnrolled(DataError):
    pass


class NoEnrollableUsers(DataError):
    """Every validation user failed to enroll; the system cannot be adjusted."""


class TooFewUsers(DataError):
    pass
