"""Exception types shared across the package.

Each error carries the CLI exit code it maps to, so the command-line layer
never has to guess.
"""


class BlackBandError(Exception):
    exit_code = 1


class ParameterError(BlackBandError, ValueError):
    """Model or configuration parameters outside their domain."""

    exit_code = 2


class DataError(BlackBandError, ValueError):
    """Malformed or unusable input data."""

    exit_code = 3


class NoWindow(DataError):
    """Not enough history for the long-trend window."""


class InsufficientData(DataError):
    pass


class NumericalError(BlackBandError, ArithmeticError):
    exit_code = 4


class HorizonTooSmall(NumericalError):
    """1 - C(tau) underflows, so the slope formula is 0/0."""


class NoCrossing(NumericalError):
    pass


class DegenerateDesign(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
