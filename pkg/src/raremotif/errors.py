class RareMotifError(Exception):
    pass


class ModelError(RareMotifError, ValueError):
    """Invalid transition matrix or alphabet."""


class InputError(RareMotifError, ValueError):
    """Malformed word, sequence or file content."""


class ConfigurationError(RareMotifError, ValueError):
    """Parameters that cannot produce a valid run."""
