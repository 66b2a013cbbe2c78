"""Exact ground truth on tiny instances, by brute-force enumeration.

Nothing here reuses the samplers' probability code: p-values come from
walking every sequence, and word distributions from evaluating each
sampler's construction directly on every member word.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from raremotif.errors import ConfigurationError
from raremotif.markov import MarkovModel, Word
from raremotif.patterns import CountState, PatternFamily
from raremotif.wordbank import (
    JOINED,
    CrmSampler,
    ExplicitSampler,
    InvertedRepeatSampler,
    PalindromeSampler,
    PswmSampler,
    StructuredSampler,
    WordSampler,
)

MAX_SEQUENCES = 2**24
MAX_MEMBERS = 2**20


@dataclass(frozen=True)
class ExactResult:
    p_exact: float
    n: int
    c: int
    family: str
    enumerated: int

    def to_text(self) -> str:
        return (
            f"p_exact = {self.p_exact:.17g}\nn = {self.n}\nc = {self.c}\n"
            f"family = {self.family}\nenumerated = {self.enumerated}"
        )


def exact_pvalue(model: MarkovModel, family: PatternFamily, n: int, c: int) -> ExactResult:
    """P{N >= c} summed over all |X|^n sequences, depth-first with running probabilities."""
    k = len(model.alphabet)
    total = k**n
    if total > MAX_SEQUENCES:
        raise ConfigurationError(f"{k}^{n} sequences exceed the enumeration limit of 2^24")
    pi = model.pi.tolist()
    sigma = model.sigma.tolist()
    hits: list[float] = []

    def walk(state: CountState, last: int, prob: float, depth: int) -> None:
        if state.N >= c:
            # the count never decreases, so every completion qualifies
            hits.append(prob)
            return
        if depth == n:
            return
        row = sigma[last]
        for x in range(k):
            walk(state.advance(x), x, prob * row[x], depth + 1)

    if c <= 0:
        return ExactResult(1.0, n, c, repr(family), total)
    if n >= 1:
        start = CountState.start(family)
        for x in range(k):
            walk(start.advance(x), x, pi[x], 1)
    return ExactResult(min(math.fsum(hits), 1.0), n, c, repr(family), total)


def exact_union_pvalue(model: MarkovModel, families, thresholds, n: int) -> float:
    """P{N^(j) >= c_j for some j}, by walking every sequence with one counter per family."""
    k = len(model.alphabet)
    if k**n > MAX_SEQUENCES:
        raise ConfigurationError(f"{k}^{n} sequences exceed the enumeration limit of 2^24")
    if len(families) != len(thresholds):
        raise ConfigurationError("need one threshold per family")
    if any(c <= 0 for c in thresholds):
        return 1.0
    pi = model.pi.tolist()
    sigma = model.sigma.tolist()
    hits: list[float] = []

    def walk(states, last, prob, depth):
        if any(st.N >= c for st, c in zip(states, thresholds)):
            hits.append(prob)
            return
        if depth == n:
            return
        row = sigma[last]
        for x in range(k):
            walk([st.advance(x) for st in states], x, prob * row[x], depth + 1)

    if n >= 1:
        start = [CountState.start(f) for f in families]
        for x in range(k):
            walk([st.advance(x) for st in start], x, pi[x], 1)
    return min(math.fsum(hits), 1.0)


# --- exact word distributions ----------------------------------------------------


def _path_prob(model: MarkovModel, word) -> float:
    p = 1.0
    for a, b in zip(word, word[1:]):
        p *= model.sigma[a, b]
    return p


def _normalise(weights: dict[Word, float]) -> dict[Word, float]:
    total = math.fsum(weights.values())
    return {w: v / total for w, v in weights.items() if v > 0}


def _all_words(k: int, length: int):
    return itertools.product(range(k), repeat=length)


def _guard(count: int) -> None:
    if count > MAX_MEMBERS:
        raise ConfigurationError(f"{count} candidate words exceed the enumeration limit of 2^20")


def _palindrome_q(model: MarkovModel, m: int, joined: bool) -> dict[Word, float]:
    k = len(model.alphabet)
    _guard(k**m)
    comp = model.alphabet.complement
    weights = {}
    for u in _all_words(k, m):
        uc = tuple(comp[x] for x in reversed(u))
        w = model.pi[u[0]] * _path_prob(model, u) * _path_prob(model, uc)
        if joined:
            w *= model.sigma[u[-1], uc[0]]
        weights[u + uc] = w
    return _normalise(weights)


def _gapped(model: MarkovModel, heads: dict, tails: dict | None, d1: int, d2: int) -> dict[Word, float]:
    """Combine head words, a uniform gap length and chain-drawn gap symbols (and tail words)."""
    k = len(model.alphabet)
    _guard(len(heads) * (len(tails) if tails else 1) * sum(k**d for d in range(d1, d2 + 1)))
    D = d2 - d1 + 1
    out: dict[Word, float] = {}
    for head, qh in heads.items():
        for d in range(d1, d2 + 1):
            for z in _all_words(k, d):
                pz = _path_prob(model, (head[-1],) + z) / D
                for tail, qt in (tails or {(): 1.0}).items():
                    w = head + z + tail
                    out[w] = out.get(w, 0.0) + qh * pz * qt
    return out


def _pswm_q(sampler: PswmSampler, exact_xi: bool) -> dict[Word, float]:
    model, pswm, theta = sampler.model, sampler.pswm, sampler.theta
    k = len(model.alphabet)
    _guard(k**pswm.m)
    tilted = {}
    for v in _all_words(k, pswm.m):
        s = pswm.score(v)
        tilted[v] = (s, math.exp(theta * s) * model.pi[v[0]] * _path_prob(model, v))
    lam = math.fsum(w for _, w in tilted.values())
    accepted = {v: w / lam for v, (s, w) in tilted.items() if s >= sampler.threshold}
    xi = 1.0 / math.fsum(accepted.values()) if exact_xi else sampler.xi
    return {v: xi * p for v, p in accepted.items()}


def _structured_q(sampler: StructuredSampler) -> dict[Word, float]:
    model = sampler.model
    k = len(model.alphabet)
    core = sampler.x + sampler.y
    L = len(core)
    heads: dict[Word, float] = {}
    # k = 0 keeps the core; k >= 1 substitutes position k by one of the other symbols
    variants = [(core, 1.0 / (L + 1))]
    for pos in range(L):
        for b in range(k):
            if b != core[pos]:
                variants.append((core[:pos] + (b,) + core[pos + 1 :], 1.0 / ((L + 1) * (k - 1))))
    out: dict[Word, float] = {}
    m = sampler.m
    for variant, qv in variants:
        part = _gapped(model, {variant[:m]: qv}, {variant[m:]: 1.0}, sampler.d1, sampler.d2)
        for w, p in part.items():
            out[w] = out.get(w, 0.0) + p
    return out


def exact_q(sampler: WordSampler, exact_xi: bool = True) -> dict[Word, float]:
    """Exact law of ``sampler.draw`` as a word -> probability map.

    For PSWM samplers ``exact_xi`` normalises the accepted words exactly; with
    ``exact_xi=False`` the sampler's frozen xi is used, as its ``q`` does.
    """
    model = sampler.model
    if isinstance(sampler, ExplicitSampler):
        return _normalise({w: model.pi[w[0]] * _path_prob(model, w) for w in sampler.family.words})
    if isinstance(sampler, PalindromeSampler):
        return _palindrome_q(model, sampler.m, sampler.variant == JOINED)
    if isinstance(sampler, InvertedRepeatSampler):
        arms = _palindrome_q(model, sampler.m, sampler.pal.variant == JOINED)
        heads = {w[: sampler.m]: p for w, p in arms.items()}
        comp = model.alphabet.complement
        out = _gapped(model, heads, None, sampler.d1, sampler.d2)
        return {w + tuple(comp[x] for x in reversed(w[: sampler.m])): p for w, p in out.items()}
    if isinstance(sampler, PswmSampler):
        return _pswm_q(sampler, exact_xi)
    if isinstance(sampler, CrmSampler):
        heads = exact_q(sampler.first, exact_xi)
        tails = exact_q(sampler.second, exact_xi)
        return _gapped(model, heads, tails, sampler.d1, sampler.d2)
    if isinstance(sampler, StructuredSampler):
        return _structured_q(sampler)
    raise ConfigurationError(f"no exact law for {type(sampler).__name__}")


def family_members(family: PatternFamily, k: int) -> list[Word]:
    """Every member of ``family`` over a k-symbol alphabet, by testing all candidate words."""
    _guard(sum(k**ell for ell in family.lengths()))
    return [w for ell in family.lengths() for w in _all_words(k, ell) if family.contains(w)]


def total_path_prob(model: MarkovModel, words) -> float:
    """sum over words of sigma(v)."""
    return math.fsum(_path_prob(model, w) for w in words)


def sequence_probabilities(model: MarkovModel, n: int) -> tuple[np.ndarray, np.ndarray]:
    """All |X|^n sequences (lexicographic rows) with their null probabilities."""
    k = len(model.alphabet)
    if k**n > MAX_SEQUENCES:
        raise ConfigurationError("too many sequences to enumerate")
    seqs = np.array(list(_all_words(k, n)), dtype=np.intp).reshape(-1, n)
    probs = model.pi[seqs[:, 0]].copy()
    for i in range(n - 1):
        probs *= model.sigma[seqs[:, i], seqs[:, i + 1]]
    return seqs, probs
