class ShapeError(ValueError):
    """Input has the wrong dimension for the receiving model or environment."""


class ConfigurationError(ValueError):
    """A configuration value is invalid or cannot be satisfied."""


class ContractError(RuntimeError):
    """An object was used outside its lifecycle (e.g. stepping a finished episode)."""


class NonFiniteError(FloatingPointError):
    """A NaN or Inf showed up in a loss, ratio or metric."""
