"""Exception types raised across the package."""


class PlacementError(Exception):
    """Base class for every error raised by placerl."""

    code = "PlacementError"


class ParseError(PlacementError):
    code = "ParseError"


class ValidationError(PlacementError):
    code = "ValidationError"

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class CycleError(PlacementError):
    code = "CycleError"


class InvalidParams(PlacementError):
    code = "InvalidParams"


class InfeasibleInstance(PlacementError):
    code = "InfeasibleInstance"


class StateError(PlacementError):
    code = "StateError"


class IncompletePlacement(PlacementError):
    code = "IncompletePlacement"


class DimensionError(PlacementError):
    code = "DimensionError"


class DeadEnd(PlacementError):
    """No location can accept the current node."""

    code = "DeadEnd"


class NonFiniteGradient(PlacementError):
    code = "NonFiniteGradient"


class NonFiniteValue(PlacementError):
    code = "NonFiniteValue"


class NoFeasibleSample(PlacementError):
    code = "NoFeasibleSample"


class TooLarge(PlacementError):
    code = "TooLarge"

    def __init__(self, message, size=None):
        super().__init__(message)
        self.size = size
