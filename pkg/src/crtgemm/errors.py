"""Exception types raised at the public API boundary."""


class ConfigurationError(ValueError):
    """Invalid number of moduli, precision, mode or block size."""


class InputError(ValueError):
    """Non-finite entries or mismatched operand shapes."""
