"""Exception hierarchy shared by every module.

Each error carries a ``kind`` attribute used by the command-line interface
to build machine-readable error objects.
"""


class RidgeMMLError(Exception):
    """Base class for all package errors."""

    @property
    def kind(self) -> str:
        return type(self).__name__


class IoError(RidgeMMLError):
    pass


class ConstantColumn(RidgeMMLError):
    def __init__(self, index, name=None):
        self.index = index
        self.name = name
        label = f" ({name!r})" if name is not None else ""
        super().__init__(f"covariate column {index}{label} has zero scale")


class TooFewRows(RidgeMMLError):
    pass


class DimensionMismatch(RidgeMMLError):
    pass


class NumericalFailure(RidgeMMLError):
    pass


class ZeroSingularValue(RidgeMMLError):
    pass


class NonPositiveHyperparameter(RidgeMMLError):
    pass


class DegenerateFit(RidgeMMLError):
    pass


class NoBracket(RidgeMMLError):
    pass


class MaxIterations(RidgeMMLError):
    pass


class ShapeTooSmall(RidgeMMLError):
    pass


class LeverageOne(RidgeMMLError):
    pass


class SingularDesign(RidgeMMLError):
    pass


class EmptyGrid(RidgeMMLError):
    pass


class DegenerateLabels(RidgeMMLError):
    pass


class CovarianceNotPD(RidgeMMLError):
    pass


class DomainError(RidgeMMLError):
    pass


class ConfigError(RidgeMMLError):
    pass
