"""Exception types shared across the package."""


class GameError(Exception):
    """Base class for all package errors."""


class ConfigurationError(GameError, ValueError):
    """Invalid parameters or configuration (names the offending field)."""


class PricingError(GameError, ValueError):
    """A hedge cannot be priced under the chosen measure."""


class NumericError(GameError, ArithmeticError):
    """Quadrature or series evaluation did not converge."""


class ProtocolError(GameError):
    """A bet that the protocol does not allow."""


class CollateralViolation(GameError):
    """Capital fell below the collateral tolerance.

    ``round`` is the 1-based round at which it happened, ``run`` the run
    index within a batch (0 for single runs).
    """

    def __init__(self, round: int, capital: float, run: int = 0, history=None):
        self.round = round
        self.capital = capital
        self.run = run
        self.history = history
        super().__init__(f"collateral violation at round {round} (run {run}): K = {capital!r}")
