"""Exception hierarchy shared by all modules."""


class ElmdError(Exception):
    """Base class for every error raised by the package."""


class InvalidMeasure(ElmdError, ValueError):
    pass


class InvalidParam(ElmdError, ValueError):
    pass


class NotSpecial(ElmdError, ValueError):
    """The jump measure does not integrate |x| ^ x**2."""


class InsufficientMass(ElmdError, ValueError):
    pass


class QuadratureFailure(ElmdError, ArithmeticError):
    pass


class DivergentIntegral(ElmdError, ArithmeticError):
    pass


class BracketFailure(ElmdError, ArithmeticError):
    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class ArbitrageDetected(ElmdError):
    """Raised when the model admits an arbitrage of the first kind."""

    def __init__(self, verdict):
        super().__init__(f"arbitrage of the first kind detected: {getattr(verdict.status, 'value', verdict.status)}")
        self.verdict = verdict


class InfiniteActivity(ElmdError, ValueError):
    pass


class InvalidConfig(ElmdError, ValueError):
    pass


class InvalidPath(ElmdError, ValueError):
    pass


class NonpositiveWealth(ElmdError, ArithmeticError):
    pass


class NotApplicable(ElmdError, ValueError):
    pass


class ConfigError(ElmdError, ValueError):
    pass
