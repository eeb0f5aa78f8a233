"""Exception types shared across the valuation engine."""


class AffineVAError(Exception):
    """Base class for all engine errors."""


class DimensionError(AffineVAError):
    """An argument's length does not match the model dimensions."""


class DomainError(AffineVAError):
    """A log-MGF argument left the convergence strip of a coordinate family."""


class NegativeIncrementError(AffineVAError):
    """A cumulative hazard decreased (loading/state-space violation)."""


class UnsupportedCopulaError(AffineVAError):
    """Closed-form pricing requested with a copula other than independence."""


class UnsupportedContractError(AffineVAError):
    """Closed-form pricing requested for a contract shape it does not cover."""


class NonpositivePriceError(AffineVAError):
    """A price path entry needed for fund accounting is not strictly positive."""


class BracketError(AffineVAError):
    """Root bracket does not straddle a sign change."""


class ModeError(AffineVAError):
    """Monte Carlo estimation mode cannot express the requested payoff."""


class ConfigError(AffineVAError):
    """A configuration file is malformed or inconsistent."""


class TruncationWarning(UserWarning):
    """Quadrature tail estimate exceeded its tolerance."""
