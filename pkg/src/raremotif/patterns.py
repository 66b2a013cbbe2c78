"""Word families, PSWM scoring and non-overlapping occurrence counting.

Every family exposes two membership paths that must agree:

* ``contains(word)`` - scalar test on a tuple of codes, used while streaming;
* ``window_mask(seq, length)`` - vectorised test of every window of one length.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import as_strided

from raremotif.errors import ConfigurationError, InputError
from raremotif.markov import Alphabet, Word


def _windows(seq: np.ndarray, length: int) -> np.ndarray:
    if length > len(seq):
        return np.empty((0, length), dtype=seq.dtype)
    seq = np.ascontiguousarray(seq)
    step = seq.strides[0]
    return as_strided(seq, (len(seq) - length + 1, length), (step, step), writeable=False)


def as_codes(seq) -> np.ndarray:
    return np.asarray(seq, dtype=np.intp)


@dataclass(frozen=True, eq=False)
class Pswm:
    """Position specific weight matrix, ``weights[i, x]`` = w_i(x)."""

    weights: np.ndarray
    name: str = ""

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] < 1:
            raise InputError("PSWM needs at least one column")
        if not np.all(np.isfinite(w)):
            raise InputError("PSWM entries must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_rows(cls, rows, name: str = "") -> "Pswm":
        """Build from the printed layout: one row per symbol, one column per position."""
        return cls(np.asarray(rows, dtype=float).T, name)

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    @property
    def max_score(self) -> float:
        return float(self.weights.max(axis=1).sum())

    @property
    def min_score(self) -> float:
        return float(self.weights.min(axis=1).sum())

    def score(self, word: Sequence[int]) -> float:
        if len(word) != self.m:
            raise InputError(f"word length {len(word)} does not match PSWM width {self.m}")
        w = self.weights
        return float(sum(w[i, x] for i, x in enumerate(word)))

    def window_scores(self, seq: np.ndarray) -> np.ndarray:
        win = _windows(as_codes(seq), self.m)
        return self.weights[np.arange(self.m), win].sum(axis=1)

    def rows(self) -> np.ndarray:
        return self.weights.T


def parse_pswm(text: str, alphabet: Alphabet | None = None, name: str = "") -> Pswm:
    """Parse the PSWM file layout: alphabet line, then one row of ``m`` numbers per symbol."""
    lines = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise InputError("empty PSWM file")
    symbols = [s.lower() for s in lines[0]]
    if alphabet is not None and list(alphabet.symbols) != symbols:
        raise InputError(f"PSWM alphabet {symbols} does not match {list(alphabet.symbols)}")
    rows = lines[1:]
    if len(rows) != len(symbols):
        raise InputError(f"expected {len(symbols)} PSWM rows, found {len(rows)}")
    try:
        values = [[float(x) for x in row] for row in rows]
    except ValueError as exc:
        raise InputError(f"non-numeric PSWM entry: {exc}") from None
    if len({len(r) for r in values}) != 1:
        raise InputError("PSWM rows have different lengths")
    return Pswm.from_rows(values, name)


def load_pswm(path: str | Path, alphabet: Alphabet | None = None) -> Pswm:
    path = Path(path)
    return parse_pswm(path.read_text(), alphabet, name=str(path))


def format_pswm(pswm: Pswm, alphabet: Alphabet) -> str:
    def fmt(x: float) -> str:
        return str(int(x)) if float(x).is_integer() else repr(float(x))

    lines = [" ".join(alphabet.symbols)]
    lines += [" ".join(fmt(x) for x in row) for row in pswm.rows()]
    return "\n".join(lines) + "\n"


class PatternFamily(ABC):
    """A finite set of words V with known length range [min_length, max_length]."""

    min_length: int
    max_length: int

    def lengths(self) -> range:
        return range(self.min_length, self.max_length + 1)

    @abstractmethod
    def contains(self, word: Word) -> bool: ...

    @abstractmethod
    def window_mask(self, seq: np.ndarray, length: int) -> np.ndarray:
        """Boolean array: is ``seq[i:i+length]`` in V, for every start ``i``."""

    def window_masks(self, seq: np.ndarray) -> dict[int, np.ndarray]:
        seq = as_codes(seq)
        return {ell: self.window_mask(seq, ell) for ell in self.lengths() if ell <= len(seq)}

    def is_member(self, word: Sequence[int]) -> bool:
        return self.contains(tuple(word))

    def shortest_suffix(self, seq: Sequence[int], end: int | None = None) -> int | None:
        """Length of the shortest word of V ending at ``seq[end - 1]``, if any."""
        end = len(seq) if end is None else end
        for j in self.lengths():
            if j > end:
                break
            if self.contains(tuple(seq[end - j : end])):
                return j
        return None


class ExplicitSet(PatternFamily):
    """A finite list of words; suffix queries walk a trie of reversed words."""

    def __init__(self, words: Iterable[Sequence[int]]):
        self.words: tuple[Word, ...] = tuple(sorted({tuple(int(x) for x in w) for w in words}))
        if not self.words or any(len(w) == 0 for w in self.words):
            raise ConfigurationError("explicit word set must contain non-empty words")
        self._set = frozenset(self.words)
        self.min_length = min(map(len, self.words))
        self.max_length = max(map(len, self.words))
        # reversed-suffix trie: node -> {symbol: child}; terminal depth marks a word
        self._trie: dict = {}
        for w in self.words:
            node = self._trie
            for x in reversed(w):
                node = node.setdefault(x, {})
            node[None] = True
        self._by_length: dict[int, np.ndarray] = {}
        for w in self.words:
            self._by_length.setdefault(len(w), []).append(w)
        self._by_length = {k: np.array(v, dtype=np.intp) for k, v in self._by_length.items()}

    def __repr__(self) -> str:
        return f"ExplicitSet({list(self.words)})"

    def contains(self, word: Word) -> bool:
        return word in self._set

    def shortest_suffix(self, seq, end=None):
        end = len(seq) if end is None else end
        node = self._trie
        depth = 0
        i = end - 1
        while i >= 0:
            node = node.get(seq[i])
            if node is None:
                return None
            depth += 1
            if None in node:
                return depth
            i -= 1
        return None

    def window_mask(self, seq, length):
        seq = as_codes(seq)
        win = _windows(seq, length)
        mask = np.zeros(len(win), dtype=bool)
        for w in self._by_length.get(length, ()):
            mask |= np.all(win == w, axis=1)
        return mask


class Palindrome(PatternFamily):
    """Words u_m u_m^c of length 2m."""

    def __init__(self, m: int, alphabet: Alphabet):
        if m < 1:
            raise ConfigurationError("palindrome half-length must be >= 1")
        if alphabet.complement is None:
            raise ConfigurationError("palindromes need an alphabet with a complement map")
        self.m = m
        self.alphabet = alphabet
        self.complement = np.array(alphabet.complement, dtype=np.intp)
        self.min_length = self.max_length = 2 * m

    def __repr__(self) -> str:
        return f"Palindrome(m={self.m})"

    def contains(self, word):
        m = self.m
        if len(word) != 2 * m:
            return False
        comp = self.alphabet.complement
        return all(word[2 * m - 1 - i] == comp[word[i]] for i in range(m))

    def window_mask(self, seq, length):
        seq = as_codes(seq)
        if length != 2 * self.m:
            return np.zeros(max(len(seq) - length + 1, 0), dtype=bool)
        return _arms_match(_windows(seq, length), self.m, self.complement)


def _arms_match(win: np.ndarray, m: int, complement: np.ndarray) -> np.ndarray:
    left = win[:, :m]
    right = win[:, win.shape[1] - m :]
    return np.all(right[:, ::-1] == complement[left], axis=1)


class InvertedRepeat(PatternFamily):
    """Words u_m z u_m^c with a gap z of length d1..d2."""

    def __init__(self, m: int, d1: int, d2: int, alphabet: Alphabet):
        if m < 1:
            raise ConfigurationError("inverted repeat arm length must be >= 1")
        if not 0 <= d1 <= d2:
            raise ConfigurationError(f"need 0 <= d1 <= d2, got d1={d1}, d2={d2}")
        if alphabet.complement is None:
            raise ConfigurationError("inverted repeats need an alphabet with a complement map")
        self.m, self.d1, self.d2 = m, d1, d2
        self.alphabet = alphabet
        self.complement = np.array(alphabet.complement, dtype=np.intp)
        self.min_length = 2 * m + d1
        self.max_length = 2 * m + d2

    def __repr__(self) -> str:
        return f"InvertedRepeat(m={self.m}, d1={self.d1}, d2={self.d2})"

    def contains(self, word):
        m = self.m
        ell = len(word)
        if not self.min_length <= ell <= self.max_length:
            return False
        comp = self.alphabet.complement
        return all(word[ell - 1 - i] == comp[word[i]] for i in range(m))

    def window_mask(self, seq, length):
        seq = as_codes(seq)
        if not self.min_length <= length <= self.max_length:
            return np.zeros(max(len(seq) - length + 1, 0), dtype=bool)
        return _arms_match(_windows(seq, length), self.m, self.complement)


class PswmMotif(PatternFamily):
    """Words of length m with score >= t. Scores are compared exactly, no epsilon."""

    def __init__(self, pswm: Pswm, threshold: float):
        if threshold > pswm.max_score:
            raise ConfigurationError(
                f"threshold {threshold} exceeds the maximum achievable score {pswm.max_score}"
            )
        self.pswm = pswm
        self.threshold = float(threshold)
        self.min_length = self.max_length = pswm.m
        self._w = pswm.weights.tolist()

    def __repr__(self) -> str:
        return f"PswmMotif({self.pswm.name or 'pswm'}, t={self.threshold:g})"

    def contains(self, word):
        if len(word) != self.min_length:
            return False
        w = self._w
        return sum(w[i][x] for i, x in enumerate(word)) >= self.threshold

    def window_mask(self, seq, length):
        seq = as_codes(seq)
        if length != self.min_length:
            return np.zeros(max(len(seq) - length + 1, 0), dtype=bool)
        return self.pswm.window_scores(seq) >= self.threshold


def _fixed_length(family: PatternFamily) -> int:
    if family.min_length != family.max_length:
        raise ConfigurationError("co-occurrence components must have a fixed word length")
    return family.min_length


class CoOccurrence(PatternFamily):
    """Words v_m z u_r with v in ``first``, u in ``second`` and d1 <= |z| <= d2.

    The components are fixed-length families, usually two :class:`PswmMotif`.
    """

    def __init__(self, first: PatternFamily, second: PatternFamily, d1: int, d2: int):
        if not 0 <= d1 <= d2:
            raise ConfigurationError(f"need 0 <= d1 <= d2, got d1={d1}, d2={d2}")
        self.first, self.second = first, second
        self.m = _fixed_length(first)
        self.r = _fixed_length(second)
        self.d1, self.d2 = d1, d2
        self.min_length = self.m + self.r + d1
        self.max_length = self.m + self.r + d2

    def __repr__(self) -> str:
        return f"CoOccurrence({self.first!r}, {self.second!r}, d1={self.d1}, d2={self.d2})"

    def contains(self, word):
        ell = len(word)
        if not self.min_length <= ell <= self.max_length:
            return False
        return self.first.contains(word[: self.m]) and self.second.contains(word[ell - self.r :])

    def _component_masks(self, seq):
        return self.first.window_mask(seq, self.m), self.second.window_mask(seq, self.r)

    def window_mask(self, seq, length, _parts=None):
        seq = as_codes(seq)
        count = max(len(seq) - length + 1, 0)
        if not self.min_length <= length <= self.max_length or count == 0:
            return np.zeros(count, dtype=bool)
        head, tail = _parts if _parts is not None else self._component_masks(seq)
        return head[:count] & tail[length - self.r : length - self.r + count]

    def window_masks(self, seq):
        seq = as_codes(seq)
        parts = self._component_masks(seq) if len(seq) >= self.min_length else None
        return {ell: self.window_mask(seq, ell, parts) for ell in self.lengths() if ell <= len(seq)}


class StructuredMotif(PatternFamily):
    """Words v_m z u_r with d1 <= |z| <= d2 and at most one mismatch of v u against x y."""

    def __init__(self, x: Sequence[int], y: Sequence[int], d1: int, d2: int):
        if not 0 <= d1 <= d2:
            raise ConfigurationError(f"need 0 <= d1 <= d2, got d1={d1}, d2={d2}")
        if not x or not y:
            raise ConfigurationError("structured motif words must be non-empty")
        self.x, self.y = tuple(x), tuple(y)
        self.m, self.r = len(self.x), len(self.y)
        self.d1, self.d2 = d1, d2
        self.min_length = self.m + self.r + d1
        self.max_length = self.m + self.r + d2
        self._xa = np.array(self.x, dtype=np.intp)
        self._ya = np.array(self.y, dtype=np.intp)

    def __repr__(self) -> str:
        return f"StructuredMotif(x={self.x}, y={self.y}, d1={self.d1}, d2={self.d2})"

    def mismatches(self, word: Sequence[int]) -> int:
        ell = len(word)
        head = sum(a != b for a, b in zip(word[: self.m], self.x))
        tail = sum(a != b for a, b in zip(word[ell - self.r :], self.y))
        return head + tail

    def contains(self, word):
        if not self.min_length <= len(word) <= self.max_length:
            return False
        return self.mismatches(word) <= 1

    def _component_mismatches(self, seq):
        mx = np.sum(_windows(seq, self.m) != self._xa, axis=1)
        my = np.sum(_windows(seq, self.r) != self._ya, axis=1)
        return mx, my

    def window_mismatches(self, seq, length, _parts=None) -> np.ndarray:
        seq = as_codes(seq)
        count = max(len(seq) - length + 1, 0)
        if count == 0:
            return np.zeros(0, dtype=np.intp)
        mx, my = _parts if _parts is not None else self._component_mismatches(seq)
        return mx[:count] + my[length - self.r : length - self.r + count]

    def window_mask(self, seq, length, _parts=None):
        seq = as_codes(seq)
        count = max(len(seq) - length + 1, 0)
        if not self.min_length <= length <= self.max_length:
            return np.zeros(count, dtype=bool)
        return self.window_mismatches(seq, length, _parts) <= 1

    def window_masks(self, seq):
        seq = as_codes(seq)
        parts = self._component_mismatches(seq) if len(seq) >= self.min_length else None
        return {ell: self.window_mask(seq, ell, parts) for ell in self.lengths() if ell <= len(seq)}


# --- counting ---------------------------------------------------------------


def shortest_suffix_match(family: PatternFamily, prefix: Sequence[int]) -> int | None:
    return family.shortest_suffix(tuple(prefix))


def shortest_match_lengths(family: PatternFamily, seq, masks: dict | None = None) -> np.ndarray:
    """``out[e]`` = length of the shortest word ending at 1-based position e (0 if none).

    ``masks`` may supply precomputed ``family.window_masks(seq)``.
    """
    seq = as_codes(seq)
    out = np.zeros(len(seq) + 1, dtype=np.intp)
    masks = family.window_masks(seq) if masks is None else masks
    for ell, mask in sorted(masks.items()):
        ends = np.flatnonzero(mask) + ell
        fresh = ends[out[ends] == 0]
        out[fresh] = ell
    return out


# Sequences up to this length are counted with scalar membership tests, which
# beat the vectorised window scan when there are only a handful of windows.
SHORT_SEQUENCE = 32


def count_profile(family: PatternFamily, seq, masks: dict | None = None) -> list[int]:
    """Running counts N_0..N_n of non-overlapping words.

    N_m = max(N_{m-1}, N_{m-j} + 1) with j the length of the shortest word ending
    at m. The outer max only matters for families in which one word contains
    another as a proper factor; there it keeps N equal to the maximum packing.
    """
    if masks is None and len(seq) <= SHORT_SEQUENCE:
        return count_profile_scalar(family, seq)
    shortest = shortest_match_lengths(family, seq, masks).tolist()
    counts = [0] * len(shortest)
    for e in range(1, len(shortest)):
        prev = counts[e - 1]
        j = shortest[e]
        if j:
            cand = counts[e - j] + 1
            counts[e] = cand if cand > prev else prev
        else:
            counts[e] = prev
    return counts


def count_profile_scalar(family: PatternFamily, seq) -> list[int]:
    """Same recursion as :func:`count_profile`, one suffix query per position."""
    seq = tuple(int(x) for x in seq)
    counts = [0] * (len(seq) + 1)
    for e in range(1, len(seq) + 1):
        prev = counts[e - 1]
        j = family.shortest_suffix(seq, e)
        if j is not None and counts[e - j] + 1 > prev:
            prev = counts[e - j] + 1
        counts[e] = prev
    return counts


def count_nonoverlapping(family: PatternFamily, seq) -> int:
    return count_profile(family, seq)[-1]


def has_occurrence(family: PatternFamily, seq) -> bool:
    """Cheap N >= 1 test."""
    if len(seq) <= SHORT_SEQUENCE:
        return count_profile_scalar(family, seq)[-1] > 0
    return any(mask.any() for mask in family.window_masks(as_codes(seq)).values())


@dataclass(frozen=True)
class CountState:
    """Streaming count: the trailing context needed to extend N_m by one symbol."""

    family: PatternFamily = field(repr=False)
    N: int = 0
    position: int = 0
    tail: Word = ()
    history: tuple[int, ...] = (0,)

    @classmethod
    def start(cls, family: PatternFamily) -> "CountState":
        return cls(family)

    def advance(self, symbol: int) -> "CountState":
        family = self.family
        keep = family.max_length
        tail = (self.tail + (symbol,))[-keep:]
        j = family.shortest_suffix(tail)
        prev = self.N
        n = prev
        if j is not None:
            cand = self.history[-j] + 1
            if cand > prev:
                n = cand
        history = (self.history + (n,))[-(keep + 1) :]
        return CountState(family, n, self.position + 1, tail, history)


def count_incremental(state: CountState, next_symbol: int) -> CountState:
    return state.advance(next_symbol)
