"""Importance sampling of word-pattern counts in Markov sequences."""

from raremotif.errors import ConfigurationError, InputError, ModelError
from raremotif.markov import Alphabet, MarkovModel
from raremotif.rng import Stream, replicate_stream

__all__ = [
    "Alphabet",
    "ConfigurationError",
    "InputError",
    "MarkovModel",
    "ModelError",
    "Stream",
    "replicate_stream",
]

__version__ = "0.1.0"
