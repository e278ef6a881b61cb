"""Exception types shared across the package."""


class ConfigError(Exception):
    """Configuration file could not be parsed or is structurally invalid."""


class ValidationError(ConfigError):
    """A configuration value violates an invariant; message names the field."""


class ContractError(ValueError):
    """An API precondition was violated (bad index, shape, or scheme/state mix)."""


class SingularChannelError(RuntimeError):
    """Zero-forcing hit a rank-deficient channel matrix; message names the subcarrier."""


class SizeLimitError(RuntimeError):
    """A brute-force search would exceed its candidate-count guard."""
