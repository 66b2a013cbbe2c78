"""Alphabets, first-order Markov background models and word probabilities."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from raremotif.errors import InputError, ModelError
from raremotif.rng import Stream, cdf_rows

Word = tuple[int, ...]

DNA_COMPLEMENT = {"a": "t", "t": "a", "c": "g", "g": "c"}

# Words at most this long multiply probabilities directly; longer ones sum logs.
LINEAR_PROB_MAX_LEN = 32


@dataclass(frozen=True)
class Alphabet:
    """Ordered single-character symbols, stored internally as integer codes.

    ``complement`` maps code -> code and must be an involution.
    """

    symbols: tuple[str, ...]
    complement: tuple[int, ...] | None = None
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ModelError(f"alphabet symbols must be distinct: {self.symbols}")
        if not self.symbols:
            raise ModelError("alphabet is empty")
        for s in self.symbols:
            if len(s) != 1:
                raise ModelError(f"symbols must be single characters, got {s!r}")
        if self.complement is not None:
            comp = self.complement
            k = len(self.symbols)
            if len(comp) != k or any(not 0 <= c < k for c in comp):
                raise ModelError("complement must map every symbol into the alphabet")
            if any(comp[comp[i]] != i for i in range(k)):
                raise ModelError("complement must be self-inverse")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.symbols)})

    @classmethod
    def dna(cls) -> "Alphabet":
        return cls.from_symbols("acgt", DNA_COMPLEMENT)

    @classmethod
    def from_symbols(cls, symbols: Iterable[str], complement: dict[str, str] | None = None) -> "Alphabet":
        symbols = tuple(symbols)
        comp = None
        if complement is not None:
            idx = {s: i for i, s in enumerate(symbols)}
            try:
                comp = tuple(idx[complement[s]] for s in symbols)
            except KeyError as exc:
                raise ModelError(f"complement undefined for {exc.args[0]!r}") from None
        return cls(symbols, comp)

    def __len__(self) -> int:
        return len(self.symbols)

    def encode(self, text: str | Sequence[int]) -> Word:
        if not isinstance(text, str):
            word = tuple(int(x) for x in text)
            if any(not 0 <= x < len(self.symbols) for x in word):
                raise InputError(f"symbol code out of range in {word}")
            return word
        try:
            return tuple(self._index[ch] for ch in text.strip().lower())
        except KeyError as exc:
            raise InputError(f"symbol {exc.args[0]!r} is not in alphabet {''.join(self.symbols)}") from None

    def decode(self, codes: Iterable[int]) -> str:
        return "".join(self.symbols[int(c)] for c in codes)

    def complement_word(self, word: Sequence[int]) -> Word:
        """Reverse complement: u_1..u_m -> u_m^c..u_1^c."""
        if self.complement is None:
            raise ModelError("alphabet has no complement map")
        comp = self.complement
        return tuple(comp[x] for x in reversed(word))


def stationary(sigma: np.ndarray) -> np.ndarray:
    """Stationary distribution of a positive row-stochastic matrix.

    Solves ``pi (P - I) = 0`` with the normalisation ``sum(pi) = 1`` replacing one
    equation, then polishes with a few power steps.
    """
    sigma = np.asarray(sigma, dtype=float)
    _check_stochastic(sigma)
    k = sigma.shape[0]
    a = sigma.T - np.eye(k)
    a[-1, :] = 1.0
    b = np.zeros(k)
    b[-1] = 1.0
    pi = np.linalg.solve(a, b)
    for _ in range(3):
        pi = pi @ sigma
        pi /= pi.sum()
    if np.max(np.abs(pi @ sigma - pi)) > 1e-12 or np.any(pi <= 0):
        raise ModelError("failed to compute a stationary distribution")
    return pi


def _check_stochastic(sigma: np.ndarray) -> None:
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1] or sigma.shape[0] == 0:
        raise ModelError(f"transition matrix must be square, got shape {sigma.shape}")
    if not np.all(np.isfinite(sigma)):
        raise ModelError("transition matrix has non-finite entries")
    if np.any(sigma <= 0):
        raise ModelError("transition probabilities must be strictly positive")
    if np.max(np.abs(sigma.sum(axis=1) - 1.0)) > 1e-12:
        raise ModelError("transition matrix rows must sum to 1")


class MarkovModel:
    """Null sequence law: ``s_1 ~ pi`` and ``s_{i+1} | s_i ~ sigma(s_i, .)``.

    Immutable after construction; ``pi`` is always derived from ``sigma``.
    """

    def __init__(self, alphabet: Alphabet, sigma):
        sigma = np.array(sigma, dtype=float)
        if sigma.shape != (len(alphabet), len(alphabet)):
            raise ModelError(
                f"transition matrix shape {sigma.shape} does not match alphabet of size {len(alphabet)}"
            )
        self.alphabet = alphabet
        self.sigma = sigma
        self.pi = stationary(sigma)
        self.log_sigma = np.log(sigma)
        self.log_pi = np.log(self.pi)
        self.sigma.setflags(write=False)
        self.pi.setflags(write=False)
        self.log_sigma.setflags(write=False)
        self.log_pi.setflags(write=False)
        self._pi_cdf = cdf_rows(self.pi)[0]
        self._row_cdf = cdf_rows(sigma)
        self._sigma_rows = sigma.tolist()
        self._log_sigma_rows = self.log_sigma.tolist()

    @classmethod
    def uniform(cls, alphabet: Alphabet | None = None) -> "MarkovModel":
        alphabet = alphabet or Alphabet.dna()
        k = len(alphabet)
        return cls(alphabet, np.full((k, k), 1.0 / k))

    @classmethod
    def from_file(cls, path: str | Path, alphabet: Alphabet | None = None) -> "MarkovModel":
        return parse_transition_matrix(Path(path).read_text(), alphabet)

    def __len__(self) -> int:
        return len(self.alphabet)

    def __repr__(self) -> str:
        return f"MarkovModel(alphabet={''.join(self.alphabet.symbols)!r}, sigma={self.sigma.tolist()})"

    def encode(self, word) -> Word:
        return self.alphabet.encode(word)

    def log_word_prob(self, word: Sequence[int]) -> float:
        word = self.encode(word)
        if not word:
            raise InputError("word must be non-empty")
        ls = self.log_sigma
        return math.fsum(ls[word[j], word[j + 1]] for j in range(len(word) - 1))

    def word_prob(self, word: Sequence[int]) -> float:
        """Conditional path probability prod_j sigma(v_j v_{j+1}); no pi factor."""
        word = self.encode(word)
        if not word:
            raise InputError("word must be non-empty")
        if len(word) > LINEAR_PROB_MAX_LEN:
            return math.exp(self.log_word_prob(word))
        rows = self._sigma_rows
        p = 1.0
        for a, b in zip(word, word[1:]):
            p *= rows[a][b]
        return p

    def generate(self, n: int, stream: Stream) -> list[int]:
        if n < 1:
            raise InputError("sequence length must be at least 1")
        first = stream.categorical(self._pi_cdf)
        return [first] + self.generate_from(first, n - 1, stream)

    def generate_from(self, start: int, n: int, stream: Stream) -> list[int]:
        """``n`` further symbols of the chain, conditioned on the previous symbol ``start``."""
        if not 0 <= start < len(self.alphabet):
            raise InputError(f"invalid start symbol {start!r}")
        out = []
        cdf = self._row_cdf
        rnd = stream.random
        x = start
        for _ in range(n):
            row = cdf[x]
            u = rnd()
            x = 0
            while row[x] <= u:
                x += 1
            out.append(x)
        return out

    def draw_initial(self, stream: Stream) -> int:
        return stream.categorical(self._pi_cdf)


def parse_transition_matrix(text: str, alphabet: Alphabet | None = None) -> MarkovModel:
    """Parse the plain-text transition matrix format.

    Line 1 holds the alphabet symbols; each following line one row of
    probabilities in the same order. Blank lines and ``#`` comments are ignored.
    Rows within 1e-6 of unit sum are renormalised; anything further off is an error.
    """
    lines = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise InputError("empty transition matrix file")
    symbols = [s.lower() for s in lines[0]]
    k = len(symbols)
    rows = lines[1:]
    if len(rows) != k:
        raise InputError(f"expected {k} matrix rows, found {len(rows)}")
    try:
        sigma = np.array([[float(x) for x in row] for row in rows])
    except ValueError as exc:
        raise InputError(f"non-numeric matrix entry: {exc}") from None
    if sigma.shape != (k, k):
        raise InputError(f"every row must have {k} entries")
    sums = sigma.sum(axis=1)
    bad = np.abs(sums - 1.0) > 1e-6
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ModelError(f"row {symbols[i]!r} sums to {sums[i]:.6g}, not 1")
    sigma = sigma / sums[:, None]
    if alphabet is None:
        comp = DNA_COMPLEMENT if sorted(symbols) == ["a", "c", "g", "t"] else None
        alphabet = Alphabet.from_symbols(symbols, comp)
    elif list(alphabet.symbols) != symbols:
        raise InputError(f"matrix alphabet {symbols} does not match {list(alphabet.symbols)}")
    return MarkovModel(alphabet, sigma)


def format_transition_matrix(model: MarkovModel) -> str:
    head = " ".join(model.alphabet.symbols)
    rows = [" ".join(repr(float(x)) for x in row) for row in model.sigma]
    return "\n".join([head, *rows]) + "\n"
