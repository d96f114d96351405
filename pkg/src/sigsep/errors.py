"""Exception hierarchy shared across the toolkit.

The CLI maps these onto distinct exit codes, so keep the taxonomy stable:
parse problems, degenerate-signal gates, degenerate-observable gates and
optimizer failures are reported separately.
"""


class SigsepError(Exception):
    """Base class for all toolkit errors."""


class ParseError(SigsepError):
    """Malformed or empty input data (JSONL/CSV/JSON config)."""


class DegenerateSignalError(SigsepError):
    """A diagonal second moment is (numerically) zero: the signal has a
    silent channel and lies outside the admissible signal class."""


class DegenerateObservableError(SigsepError):
    """The symmetrized covariance of the observable is (numerically)
    singular: increments are supported on a hyperplane and whitening
    is impossible."""


class SourceConditionError(SigsepError):
    """More than one channel of the ground-truth source has a vanishing
    third diagonal moment; the recovery constants are undefined."""


class OptimizationError(SigsepError):
    """No optimizer restart reached the stationarity tolerance."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class AlignmentError(SigsepError):
    """The gain matrix has a numerically zero row or column, so no
    monomial alignment exists."""
