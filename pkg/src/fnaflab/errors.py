"""Exception hierarchy shared by all fnaflab modules.

The CLI maps these onto exit codes: configuration problems exit 1, data
problems exit 2, numeric problems exit 3.
"""


class FnafLabError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(FnafLabError, ValueError):
    """An array argument violates a shape or finiteness precondition."""


class ConfigError(FnafLabError, ValueError):
    """A spec/config object is inconsistent or infeasible."""


class PlacementError(FnafLabError, ValueError):
    """A lesion or synthetic feature would fall outside the image bounds."""


class UndefinedMetricError(FnafLabError, ValueError):
    """A metric's denominator is zero (all-zero target, zero variance)."""


class EmptyRegionError(UndefinedMetricError):
    """A region mask used for a masked metric selects no pixels."""


class DataError(FnafLabError, ValueError):
    """A data file or data set is malformed, missing, or misaligned."""


class ParseError(DataError):
    """A serialized artifact could not be parsed."""


class VocabularyError(DataError):
    """An annotation label is not in the accepted vocabulary."""


class AnnotationError(DataError):
    """An annotation box is inconsistent with the image it annotates."""


class MissingDataError(DataError):
    """An expected record or image is absent."""


class AlignmentError(DataError):
    """Paired collections do not line up on the same coordinates."""


class BalanceError(DataError):
    """Class balancing is impossible (no positive examples)."""


class NumericError(FnafLabError, ArithmeticError):
    """A computation produced non-finite values."""


class DivergenceError(NumericError):
    """A training run diverged."""
