import numpy as np
import pytest

from raremotif import presets
from raremotif.markov import Alphabet, MarkovModel


@pytest.fixture(scope="session")
def dna():
    return Alphabet.dna()


@pytest.fixture(scope="session")
def uniform():
    return MarkovModel.uniform()


@pytest.fixture(scope="session")
def swi5_chain():
    return presets.model("swi5-background")


@pytest.fixture(scope="session")
def binary():
    """Two symbols that are each other's complement."""
    return Alphabet.from_symbols("ab", {"a": "b", "b": "a"})


@pytest.fixture(scope="session")
def binary_chain(binary):
    return MarkovModel(binary, np.array([[0.7, 0.3], [0.4, 0.6]]))
