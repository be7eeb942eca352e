class RopperError(Exception):
    """Base class for all package errors."""


class InputError(RopperError, ValueError):
    """Invalid argument or malformed data."""


class SingularDesignError(RopperError, ArithmeticError):
    """Design matrix (or a weighted normal-equations system) is singular.

    ``columns`` names the offending design columns when they can be identified;
    ``condition`` carries a condition-number estimate when one is available.
    """

    def __init__(self, message, columns=None, condition=None):
        super().__init__(message)
        self.columns = list(columns or [])
        self.condition = condition


class StageError(RopperError):
    """Failure inside one stage of the fitting pipeline."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
