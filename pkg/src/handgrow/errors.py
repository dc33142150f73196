"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: InputError -> 2, ConfigError -> 3.
"""


class InputError(Exception):
    """Missing or malformed input data (frames, masks, directories)."""


class ConfigError(ValueError):
    """Invalid configuration value, on the command line or in a config file."""


class ParameterError(ConfigError):
    """An algorithm parameter outside its documented range."""
