"""Exception hierarchy shared by all modules."""


class AsymfreeError(ValueError):
    """Base class for invalid inputs and violated preconditions."""


class CapExceededError(AsymfreeError):
    """A configured size or runtime cap would be exceeded."""


class EmptyWordError(AsymfreeError):
    pass


class LengthMismatchError(AsymfreeError):
    pass


class GeneratorOutOfRangeError(AsymfreeError):
    pass


class DimensionMismatchError(AsymfreeError):
    pass


class ExpressionSyntaxError(AsymfreeError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class AlternatingOddKError(AsymfreeError):
    pass


class TraceNotZeroError(AsymfreeError):
    pass


class NormExceededError(AsymfreeError):
    pass


class DimensionTooSmallError(AsymfreeError):
    pass


class HypothesisViolatedError(AsymfreeError):
    pass


class UnknownMomentError(AsymfreeError, KeyError):
    pass


class MissingTargetError(AsymfreeError, KeyError):
    pass
