"""Exception types shared across the package."""


class MarketSelError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MarketSelError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateMarketError(MarketSelError, RuntimeError):
    """All agents assigned zero weight to the realized state; prices vanish."""


class UnsupportedConfigurationError(MarketSelError, ValueError):
    """A requested configuration lies outside what the component supports."""


class SchemaError(MarketSelError, ValueError):
    """A scenario document failed validation."""
