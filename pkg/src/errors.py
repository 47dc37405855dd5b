class LabelWiseError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ConfigError(LabelWiseError):
    exit_code = 1


class DataError(LabelWiseError):
    exit_code = 2


class GraphFormatError(DataError):
    pass


class GraphConsistencyError(DataError):
    pass


class InfeasibleSpecError(DataError):
    pass


class InsufficientNodesError(DataError):
    pass


class UndefinedHomophilyError(DataError):
    pass


class EmptyMaskError(DataError):
    pass


class ShapeError(LabelWiseError, ValueError):
    exit_code = 3


class NumericalAbortError(LabelWiseError):
    exit_code = 3


class GradientMismatchError(LabelWiseError):
    exit_code = 4


class NonSmoothInputError(NumericalAbortError):
    """No redraw moved the gradient-check inputs away from a ReLU or max-pool kink."""
