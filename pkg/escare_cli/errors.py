class EscareError(Exception):
    pass


class DataValidationError(EscareError, ValueError):
    """Input data, arguments or preconditions are invalid"""


class NumericalError(EscareError, ArithmeticError):
    """A numerical procedure failed (no feasible start, singular design, etc)"""
