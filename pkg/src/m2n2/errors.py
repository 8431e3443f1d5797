"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid run configuration (bad field, unknown key, invalid combination)."""


class DataFormatError(ValueError):
    """Malformed input file (IDX payload, model file, history CSV)."""
