"""Exception hierarchy. Each class carries the CLI exit code of its category."""


class OrdseqError(Exception):
    exit_code = 1


class InputError(OrdseqError):
    """Bad user-supplied data or schema."""

    exit_code = 2


class NumericalError(OrdseqError):
    """Numerical failure during fitting."""

    exit_code = 3


class ConfigError(OrdseqError):
    """Invalid configuration or parameter combination."""

    exit_code = 4


class DimensionMismatch(InputError):
    pass


class SchemaMismatch(InputError):
    pass


class InvalidOrdering(InputError):
    pass


class ConstantColumn(InputError):
    pass


class EmptyPairOverlap(InputError):
    """A pair of columns is never jointly observed.

    Attributes j, k are the offending 1-based column ids.
    """

    def __init__(self, j, k, message=None):
        self.j, self.k = j, k
        super().__init__(message or f"columns ({j}, {k}) are never jointly observed")


class DegenerateResponse(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class TestWiderThanTrain(InputError):
    """The fast all-subsets ridge path requires n_test <= n_train."""


class NumericalBreakdown(NumericalError):
    pass


class EigenFailure(NumericalError):
    pass


class NotPsdCorrected(ConfigError):
    pass


class InvalidSchedule(ConfigError):
    pass


class InvalidLag(ConfigError):
    pass


class InvalidConstants(ConfigError):
    pass


class FoldTooSmall(ConfigError):
    pass


class EmptyCandidates(ConfigError):
    pass


class OverlapError(ConfigError):
    pass


class ZeroVariance(ConfigError):
    pass


class MaxIterExceeded(UserWarning):
    """Solver hit its sweep budget; the best iterate is returned, flagged."""
