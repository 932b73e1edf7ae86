"""Exception types shared across the toolkit."""


class AnprError(Exception):
    """Base class for all toolkit-specific errors."""


class ConfigError(AnprError):
    """Bad pipeline configuration file or value."""


class CfgParseError(AnprError):
    """Malformed network description (.cfg) text."""


class WeightsError(AnprError):
    """Weight stream does not match the network description."""


class ModelFormatError(AnprError):
    """Corrupt or incompatible character-model file."""


class DegenerateHistogramError(AnprError):
    """Global thresholding asked for on a single-intensity image."""
