"""Exception types shared across the package."""


class CegError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(CegError, ValueError):
    """Array dimensions do not match what an operation requires."""


class NumericError(CegError, ValueError):
    """Non-finite values (NaN/Inf) where finite numbers are required."""


class DegenerateVectorError(CegError, ValueError):
    """Zero-norm vector passed to an operation that needs a direction."""


class ParameterError(CegError, ValueError):
    """Scalar parameter outside its valid range."""


class ConfigError(CegError, ValueError):
    """Invalid configuration (bad strategy name, inconsistent spec, ...)."""


class BudgetError(CegError):
    """Annotation-budget violation; the offending operation is rejected."""


class DoubleQueryError(CegError):
    """Attempt to query a label that has already been revealed."""


class EmptyBatchError(CegError):
    """A batch-consuming operation received no samples."""


class EmptyPoolError(CegError):
    """A pool-consuming operation received an empty pool."""


class EmptyKnowledgeError(CegError):
    """No labeled data available, so no centroids can exist."""


class ScheduleError(CegError, ValueError):
    """Epoch index outside the threshold schedule's range."""


class EvaluationError(CegError):
    """Accuracy requested over an empty sample list."""


class ModeUnavailable(CegError):
    """Requested mix mode has no eligible pair; caller skips the term."""


class DatasetFormatError(CegError, ValueError):
    """Dataset file cannot be parsed; message carries the line number."""
