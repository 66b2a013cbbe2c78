"""Word samplers with exact pointwise probability mass.

A sampler draws words from its family with mass ``q`` and can evaluate
``q`` and ``beta = q / sigma`` for any word, or vectorised over every
window of a sequence. Draws come straight from the generating distribution;
no word bank is materialised.
"""
from __future__ import annotations

import math
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from raremotif.errors import ConfigurationError
from raremotif.markov import MarkovModel, Word
from raremotif.patterns import (
    CoOccurrence,
    ExplicitSet,
    InvertedRepeat,
    Palindrome,
    PatternFamily,
    Pswm,
    PswmMotif,
    StructuredMotif,
    _windows,
    as_codes,
)
from raremotif.rng import Stream, auxiliary_stream, cdf_rows

NEG_INF = -np.inf

# Likelihoods of sequences up to this length use memoised per-word log beta.
SCALAR_MAX_LEN = 32
_BETA_CACHE_LIMIT = 1 << 16


class SequenceContext:
    """Per-sequence cache shared by every sampler evaluating windows of ``seq``."""

    def __init__(self, model: MarkovModel, seq):
        self.model = model
        self.seq = as_codes(seq)
        steps = model.log_sigma[self.seq[:-1], self.seq[1:]]
        self.cum = np.concatenate(([0.0], np.cumsum(steps)))
        self.cache: dict = {}

    def __len__(self) -> int:
        return len(self.seq)

    def n_windows(self, length: int) -> int:
        return max(len(self.seq) - length + 1, 0)

    def log_sigma_windows(self, length: int) -> np.ndarray:
        """log sigma(seq[i:i+length]) for every start i."""
        count = self.n_windows(length)
        return self.cum[length - 1 : length - 1 + count] - self.cum[:count]

    def masks(self, family: PatternFamily) -> dict[int, np.ndarray]:
        """``family.window_masks(seq)``, computed once per family."""
        key = ("masks", id(family))
        out = self.cache.get(key)
        if out is None:
            out = self.cache[key] = family.window_masks(self.seq)
        return out

    def mask(self, family: PatternFamily, length: int) -> np.ndarray:
        out = self.masks(family).get(length)
        return np.zeros(self.n_windows(length), dtype=bool) if out is None else out

    def log_path(self, offset: int, steps: int, count: int) -> np.ndarray:
        """log sigma over ``steps`` transitions starting at position i + offset, i < count."""
        return self.cum[offset + steps : offset + steps + count] - self.cum[offset : offset + count]


def _clamped_ramp(j: int, core: int, d1: int, d2: int) -> float:
    return min(max((j - core - d1 + 1) / (d2 - d1 + 1), 0.0), 1.0)


class WordSampler(ABC):
    """Draws words of ``family`` with mass q and evaluates q exactly."""

    family: PatternFamily
    model: MarkovModel

    @abstractmethod
    def draw(self, stream: Stream) -> Word: ...

    @abstractmethod
    def log_q_windows(self, ctx: SequenceContext, length: int) -> np.ndarray:
        """log q of every length-``length`` window of ``ctx.seq``; -inf off the family."""

    @abstractmethod
    def gamma(self, j: int) -> float:
        """P{length of a drawn word <= j}, in total word length."""

    @property
    def min_length(self) -> int:
        return self.family.min_length

    @property
    def max_length(self) -> int:
        return self.family.max_length

    def lengths(self) -> range:
        return self.family.lengths()

    def log_beta_windows(self, ctx: SequenceContext, length: int) -> np.ndarray:
        return self.log_q_windows(ctx, length) - ctx.log_sigma_windows(length)

    def log_q(self, word: Sequence[int]) -> float:
        word = tuple(word)
        if not word or len(word) not in self.lengths() or not self.family.contains(word):
            return -math.inf
        return float(self.log_q_windows(SequenceContext(self.model, word), len(word))[0])

    def q(self, word: Sequence[int]) -> float:
        return math.exp(self.log_q(word))

    def log_beta(self, word: Word) -> float:
        """log beta(word), memoised per sampler; -inf off the family."""
        cache = self.__dict__.setdefault("_beta_cache", {})
        val = cache.get(word)
        if val is None:
            if len(cache) >= _BETA_CACHE_LIMIT:
                cache.clear()
            lq = self.log_q(word)
            val = lq - self.model.log_word_prob(word) if lq > -math.inf else -math.inf
            cache[word] = val
        return val

    def beta(self, word: Sequence[int]) -> float:
        lq = self.log_q(word)
        if lq == -math.inf:
            return 0.0
        return math.exp(lq - self.model.log_word_prob(word))

    def gamma_table(self, n: int) -> list[float]:
        return [self.gamma(j) for j in range(n + 1)]

    def diagnostics(self) -> dict:
        return {}


# --- explicit word lists --------------------------------------------------------


class ExplicitSampler(WordSampler):
    """Explicit word list drawn with q(v) proportional to pi(v_1) sigma(v)."""

    def __init__(self, model: MarkovModel, family: ExplicitSet):
        self.model = model
        self.family = family
        logw = np.array([model.log_pi[w[0]] + model.log_word_prob(w) for w in family.words])
        self.log_norm = float(logsumexp(logw))
        probs = np.exp(logw - self.log_norm)
        self._cdf = cdf_rows(probs)[0]
        self._lengths = np.array([len(w) for w in family.words])
        self._probs = probs

    def draw(self, stream):
        return self.family.words[stream.categorical(self._cdf)]

    def log_q_windows(self, ctx, length):
        mask = ctx.mask(self.family, length)
        out = np.full(len(mask), NEG_INF)
        if mask.any():
            lp = self.model.log_pi[ctx.seq[: len(mask)]] + ctx.log_sigma_windows(length)
            out[mask] = lp[mask] - self.log_norm
        return out

    def gamma(self, j):
        return float(min(self._probs[self._lengths <= j].sum(), 1.0))


# --- palindromes and inverted repeats ----------------------------------------------

SEPARATE = "separate"
JOINED = "joined"


@dataclass(frozen=True, eq=False)
class PalindromeTables:
    """Backward tables for drawing u_m with mass prop. to pi(u_1) sigma(u) sigma(u^c) [sigma(u_m u_m^c)].

    ``log_eta[i, x]`` holds log eta_{i+1}(x) (0-based row i).
    """

    m: int
    variant: str
    log_eta: np.ndarray
    log_eta_total: float
    first: np.ndarray
    transitions: np.ndarray  # transitions[i] : row-stochastic, u_{i+1} -> u_{i+2}

    @property
    def eta(self) -> np.ndarray:
        return np.exp(self.log_eta)

    @property
    def eta_total(self) -> float:
        return math.exp(self.log_eta_total)


def build_palindrome_tables(model: MarkovModel, m: int, variant: str = JOINED) -> PalindromeTables:
    comp = model.alphabet.complement
    if comp is None:
        raise ConfigurationError("palindrome tables need an alphabet with a complement map")
    if variant not in (SEPARATE, JOINED):
        raise ConfigurationError(f"unknown palindrome variant {variant!r}")
    if m < 1:
        raise ConfigurationError("palindrome half-length must be >= 1")
    comp = np.array(comp)
    ls = model.log_sigma
    # pair[x, y] = log sigma(xy) + log sigma(y^c x^c)
    pair = ls + ls[comp][:, comp].T
    k = len(model.alphabet)
    log_eta = np.zeros((m, k))
    if variant == JOINED:
        log_eta[m - 1] = ls[np.arange(k), comp]
    for i in range(m - 2, -1, -1):
        log_eta[i] = logsumexp(pair + log_eta[i + 1][None, :], axis=1)
    total = float(logsumexp(model.log_pi + log_eta[0]))
    first = np.exp(model.log_pi + log_eta[0] - total)
    trans = np.empty((max(m - 1, 0), k, k))
    for i in range(m - 1):
        trans[i] = np.exp(pair + log_eta[i + 1][None, :] - log_eta[i][:, None])
    return PalindromeTables(m, variant, log_eta, total, first, trans)


class PalindromeSampler(WordSampler):
    def __init__(self, model: MarkovModel, m: int, variant: str = JOINED):
        self.model = model
        self.family = Palindrome(m, model.alphabet)
        self.tables = build_palindrome_tables(model, m, variant)
        self.m = m
        self._first_cdf = cdf_rows(self.tables.first)[0]
        self._trans_cdf = [cdf_rows(t) for t in self.tables.transitions]
        self._comp = model.alphabet.complement
        self._comp_arr = np.array(self._comp, dtype=np.intp)

    @property
    def variant(self) -> str:
        return self.tables.variant

    def draw_arm(self, stream: Stream) -> list[int]:
        x = stream.categorical(self._first_cdf)
        arm = [x]
        for rows in self._trans_cdf:
            x = stream.categorical(rows[x])
            arm.append(x)
        return arm

    def draw(self, stream):
        arm = self.draw_arm(stream)
        comp = self._comp
        return tuple(arm) + tuple(comp[x] for x in reversed(arm))

    def log_q_arms(self, ctx: SequenceContext, length: int) -> np.ndarray:
        """log q_pal(u u^c) for windows whose first and last m symbols are u and u^c."""
        m = self.m
        count = ctx.n_windows(length)
        seq = ctx.seq
        lq = (
            self.model.log_pi[seq[:count]]
            + ctx.log_path(0, m - 1, count)
            + ctx.log_path(length - m, m - 1, count)
            - self.tables.log_eta_total
        )
        if self.variant == JOINED:
            um = seq[m - 1 : m - 1 + count]
            lq = lq + self.model.log_sigma[um, self._comp_arr[um]]
        return lq

    def log_q_windows(self, ctx, length):
        mask = ctx.mask(self.family, length)
        out = np.full(len(mask), NEG_INF)
        if mask.any():
            out[mask] = self.log_q_arms(ctx, length)[mask]
        return out

    def gamma(self, j):
        return 1.0 if j >= 2 * self.m else 0.0


class InvertedRepeatSampler(WordSampler):
    """u z u^c: palindrome arm, uniform gap length, gap drawn from the chain after u_m."""

    def __init__(self, palindromes: PalindromeSampler, d1: int, d2: int):
        self.pal = palindromes
        self.model = palindromes.model
        self.family = InvertedRepeat(palindromes.m, d1, d2, self.model.alphabet)
        self.m, self.d1, self.d2 = palindromes.m, d1, d2
        self._log_d = math.log(d2 - d1 + 1)

    def draw(self, stream):
        arm = self.pal.draw_arm(stream)
        d = stream.randint(self.d1, self.d2)
        gap = self.model.generate_from(arm[-1], d, stream)
        comp = self.pal._comp
        return tuple(arm) + tuple(gap) + tuple(comp[x] for x in reversed(arm))

    def log_q_windows(self, ctx, length):
        mask = ctx.mask(self.family, length)
        out = np.full(len(mask), NEG_INF)
        if mask.any():
            d = length - 2 * self.m
            count = len(mask)
            lq = self.pal.log_q_arms(ctx, length) - self._log_d + ctx.log_path(self.m - 1, d, count)
            out[mask] = lq[mask]
        return out

    def gamma(self, j):
        return _clamped_ramp(j, 2 * self.m, self.d1, self.d2)


# --- PSWM motifs: exponential tilting + rejection ------------------------------------


@dataclass(frozen=True, eq=False)
class TiltedTables:
    """Backward tables of the tilted chain for one theta.

    ``log_lam[i, x]`` = log Lambda_{i+1}(theta, x); ``transitions[i]`` moves from
    column i to column i+1 (0-based).
    """

    theta: float
    log_lam: np.ndarray
    log_lambda: float
    first: np.ndarray
    transitions: np.ndarray

    @property
    def lam(self) -> float:
        return math.exp(self.log_lambda)

    def marginals(self) -> np.ndarray:
        """Column-wise symbol marginals of the tilted word distribution."""
        out = np.empty((len(self.transitions) + 1, len(self.first)))
        out[0] = self.first
        for i, t in enumerate(self.transitions):
            out[i + 1] = out[i] @ t
        return out


def build_tilted_tables(pswm: Pswm, model: MarkovModel, theta: float) -> TiltedTables:
    """Backward recursion in log space: Lambda_m = e^{theta w_m}, Lambda_i = e^{theta w_i} sigma Lambda_{i+1}."""
    w = pswm.weights
    m, k = w.shape
    if k != len(model.alphabet):
        raise ConfigurationError(f"PSWM has {k} symbol rows but the alphabet has {len(model.alphabet)}")
    ls = model.log_sigma
    log_lam = np.empty((m, k))
    log_lam[m - 1] = theta * w[m - 1]
    for i in range(m - 2, -1, -1):
        log_lam[i] = theta * w[i] + logsumexp(ls + log_lam[i + 1][None, :], axis=1)
    total = float(logsumexp(model.log_pi + log_lam[0]))
    first = np.exp(model.log_pi + log_lam[0] - total)
    trans = np.empty((m - 1, k, k))
    for i in range(m - 1):
        trans[i] = np.exp((theta * w[i])[:, None] + ls + log_lam[i + 1][None, :] - log_lam[i][:, None])
    return TiltedTables(float(theta), log_lam, total, first, trans)


def mean_score(pswm: Pswm, model: MarkovModel, theta: float) -> float:
    """E_theta[S] = d/dtheta log Lambda(theta), from the exact tilted marginals."""
    marg = build_tilted_tables(pswm, model, theta).marginals()
    return float(np.sum(marg * pswm.weights))


def mean_score_fd(pswm: Pswm, model: MarkovModel, theta: float, h: float = 1e-5) -> float:
    """Centred finite difference of log Lambda; an independent cross-check of :func:`mean_score`."""
    hi = build_tilted_tables(pswm, model, theta + h).log_lambda
    lo = build_tilted_tables(pswm, model, theta - h).log_lambda
    return (hi - lo) / (2 * h)


def solve_theta(pswm: Pswm, threshold: float, model: MarkovModel, delta: float = 0.0) -> float:
    """Tilt whose mean score is ``threshold + delta``, by bisection on an expanding bracket.

    log Lambda is convex so the mean score is non-decreasing in theta.
    """
    target = threshold + delta
    if delta < 0:
        raise ConfigurationError("delta must be non-negative")
    if target >= pswm.max_score:
        raise ConfigurationError(
            f"target score {target:g} is not below the maximum achievable score {pswm.max_score:g}"
        )
    base = mean_score(pswm, model, 0.0)
    if target <= base:
        warnings.warn(
            f"target score {target:g} does not exceed the untilted mean {base:g}; using theta = 0",
            stacklevel=2,
        )
        return 0.0
    lo, hi = 0.0, 1.0
    while mean_score(pswm, model, hi) < target:
        lo, hi = hi, hi * 2
        if hi > 1e6:
            raise ConfigurationError("could not bracket the tilting parameter")
    best, best_res = hi, math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f = mean_score(pswm, model, mid) - target
        if abs(f) < best_res:
            best, best_res = mid, abs(f)
        if f == 0:
            break
        if f < 0:
            lo = mid
        else:
            hi = mid
    return best


def tilted_score_distribution(tables: TiltedTables, pswm: Pswm, ndigits: int = 9) -> dict[float, float]:
    """Exact law of S under the tilted chain, by dynamic programming over (symbol, score).

    Partial scores are keyed after rounding to ``ndigits`` decimals, which is exact
    for integer or short-decimal weights.
    """
    w = pswm.weights
    k = w.shape[1]
    states: dict[tuple[int, float], float] = {}
    for x in range(k):
        if tables.first[x] > 0:
            key = (x, round(float(w[0, x]), ndigits))
            states[key] = states.get(key, 0.0) + float(tables.first[x])
    for i, trans in enumerate(tables.transitions):
        nxt: dict[tuple[int, float], float] = {}
        col = w[i + 1]
        for (x, s), p in states.items():
            row = trans[x]
            for y in range(k):
                key = (y, round(s + float(col[y]), ndigits))
                nxt[key] = nxt.get(key, 0.0) + p * float(row[y])
        states = nxt
    dist: dict[float, float] = {}
    for (_, s), p in states.items():
        dist[s] = dist.get(s, 0.0) + p
    return dist


def tail_probability(dist: dict[float, float], threshold: float) -> float:
    return math.fsum(p for s, p in dist.items() if s >= threshold)


class PswmSampler(WordSampler):
    """Tilted-chain draws of PSWM words, rejecting scores below the threshold.

    ``q(v) = xi e^{theta S(v)} pi(v_1) sigma(v) / Lambda(theta)`` on the motif, where
    ``xi`` is 1 / P_theta{S >= t}. By default ``xi`` is estimated once from
    ``prepass`` tilted draws and then frozen; ``xi="exact"`` computes it by dynamic
    programming over the score lattice instead.
    """

    def __init__(
        self,
        model: MarkovModel,
        pswm: Pswm,
        threshold: float,
        theta: float | None = None,
        delta: float = 0.0,
        xi: str | float = "estimate",
        seed: int = 0,
        prepass: int = 100_000,
        min_acceptance: float = 1e-4,
    ):
        self.model = model
        self.pswm = pswm
        self.family = PswmMotif(pswm, threshold)
        self.threshold = float(threshold)
        self.delta = delta
        self.theta = solve_theta(pswm, threshold, model, delta) if theta is None else float(theta)
        self.tables = build_tilted_tables(pswm, model, self.theta)
        self._first_cdf = cdf_rows(self.tables.first)[0]
        self._trans_cdf = [cdf_rows(t) for t in self.tables.transitions]
        self._w = pswm.weights.tolist()
        self.min_acceptance = min_acceptance
        self.xi_method = xi if isinstance(xi, str) else "fixed"
        if xi == "estimate":
            rate, se = self._estimate_acceptance(prepass, seed)
            self.acceptance_rate = rate
            self.xi = 1.0 / rate
            self.xi_se = se / rate**2
        elif xi == "exact":
            dist = tilted_score_distribution(self.tables, pswm)
            rate = tail_probability(dist, self.threshold)
            if rate <= 0:
                raise ConfigurationError("no word reaches the threshold")
            self.acceptance_rate = rate
            self.xi = 1.0 / rate
            self.xi_se = 0.0
        elif isinstance(xi, (int, float)):
            self.xi = float(xi)
            self.acceptance_rate = 1.0 / self.xi
            self.xi_se = 0.0
        else:
            raise ConfigurationError(f"unknown xi method {xi!r}")
        if self.acceptance_rate < min_acceptance:
            raise ConfigurationError(
                f"tilted acceptance rate {self.acceptance_rate:.3g} is below {min_acceptance:g}; "
                "use a larger theta (delta > 0)"
            )
        self.log_xi = math.log(self.xi)
        self._max_attempts = max(int(10 / self.acceptance_rate), 1_000_000)

    def draw_many(self, count: int, stream: Stream) -> np.ndarray:
        """``count`` tilted words (before rejection), vectorised over rows."""
        gen = stream.generator
        m = self.pswm.m
        out = np.empty((count, m), dtype=np.intp)
        first = np.cumsum(self.tables.first)
        out[:, 0] = np.minimum(np.searchsorted(first, gen.random(count), side="right"), len(first) - 1)
        for i, trans in enumerate(self.tables.transitions):
            cdf = np.cumsum(trans, axis=1)[out[:, i]]
            u = gen.random(count)[:, None]
            out[:, i + 1] = np.minimum((u >= cdf).sum(axis=1), trans.shape[1] - 1)
        return out

    def _estimate_acceptance(self, draws: int, seed: int) -> tuple[float, float]:
        words = self.draw_many(draws, auxiliary_stream(seed))
        scores = self.pswm.weights[np.arange(self.pswm.m), words].sum(axis=1)
        rate = float(np.mean(scores >= self.threshold))
        if rate == 0:
            raise ConfigurationError(
                f"no tilted word out of {draws} reached the threshold; use a larger theta (delta > 0)"
            )
        return rate, math.sqrt(rate * (1 - rate) / draws)

    def draw_tilted(self, stream: Stream) -> tuple[list[int], float]:
        w = self._w
        x = stream.categorical(self._first_cdf)
        word = [x]
        score = w[0][x]
        for i, rows in enumerate(self._trans_cdf, start=1):
            x = stream.categorical(rows[x])
            word.append(x)
            score += w[i][x]
        return word, score

    def draw(self, stream):
        t = self.threshold
        for _ in range(self._max_attempts):
            word, score = self.draw_tilted(stream)
            if score >= t:
                return tuple(word)
        raise ConfigurationError("tilted sampler failed to produce a motif word; increase theta")

    def log_q_windows(self, ctx, length):
        count = ctx.n_windows(length)
        out = np.full(count, NEG_INF)
        if length != self.pswm.m or count == 0:
            return out
        key = ("pswm-scores", id(self.pswm))
        scores = ctx.cache.get(key)
        if scores is None:
            scores = ctx.cache[key] = self.pswm.window_scores(ctx.seq)
        mask = scores >= self.threshold
        if mask.any():
            lq = (
                self.log_xi
                + self.theta * scores
                + self.model.log_pi[ctx.seq[:count]]
                + ctx.log_sigma_windows(length)
                - self.tables.log_lambda
            )
            out[mask] = lq[mask]
        return out

    def log_beta_windows(self, ctx, length):
        # sigma(v) cancels: beta = xi e^{theta S} pi(v_1) / Lambda
        count = ctx.n_windows(length)
        out = np.full(count, NEG_INF)
        if length != self.pswm.m or count == 0:
            return out
        key = ("pswm-scores", id(self.pswm))
        scores = ctx.cache.get(key)
        if scores is None:
            scores = ctx.cache[key] = self.pswm.window_scores(ctx.seq)
        mask = scores >= self.threshold
        if mask.any():
            lb = self.log_xi + self.theta * scores + self.model.log_pi[ctx.seq[:count]] - self.tables.log_lambda
            out[mask] = lb[mask]
        return out

    def gamma(self, j):
        return 1.0 if j >= self.pswm.m else 0.0

    def diagnostics(self):
        return {
            "theta": self.theta,
            "xi": self.xi,
            "xi_se": self.xi_se,
            "acceptance_rate": self.acceptance_rate,
            "log_lambda": self.tables.log_lambda,
        }


# --- co-occurring and structured motifs ----------------------------------------------


class CrmSampler(WordSampler):
    """v z u with v, u from independent component samplers and a chain-drawn gap."""

    def __init__(self, first: WordSampler, second: WordSampler, d1: int, d2: int):
        if first.model is not second.model:
            raise ConfigurationError("component samplers must share the background model")
        self.first, self.second = first, second
        self.model = first.model
        self.family = CoOccurrence(first.family, second.family, d1, d2)
        self.m, self.r = self.family.m, self.family.r
        self.d1, self.d2 = d1, d2
        self._log_d = math.log(d2 - d1 + 1)

    def draw(self, stream):
        v = self.first.draw(stream)
        u = self.second.draw(stream)
        d = stream.randint(self.d1, self.d2)
        gap = self.model.generate_from(v[-1], d, stream)
        return tuple(v) + tuple(gap) + tuple(u)

    def _component(self, sampler: WordSampler, ctx: SequenceContext, length: int) -> np.ndarray:
        key = ("component-lq", id(sampler), length)
        out = ctx.cache.get(key)
        if out is None:
            out = ctx.cache[key] = sampler.log_q_windows(ctx, length)
        return out

    def log_q_windows(self, ctx, length):
        count = ctx.n_windows(length)
        if not self.min_length <= length <= self.max_length or count == 0:
            return np.full(count, NEG_INF)
        d = length - self.m - self.r
        head = self._component(self.first, ctx, self.m)[:count]
        tail = self._component(self.second, ctx, self.r)[length - self.r : length - self.r + count]
        with np.errstate(invalid="ignore"):
            gap = ctx.log_path(self.m - 1, d, count)
            out = head + tail + gap - self._log_d
        return np.where(np.isfinite(head) & np.isfinite(tail), out, NEG_INF)

    def gamma(self, j):
        return _clamped_ramp(j, self.m + self.r, self.d1, self.d2)

    def diagnostics(self):
        return {"first": self.first.diagnostics(), "second": self.second.diagnostics()}


class StructuredSampler(WordSampler):
    """x z y with at most one substituted base: k uniform on 0..m+r, then a uniform gap length."""

    def __init__(self, model: MarkovModel, x: Sequence[int], y: Sequence[int], d1: int, d2: int):
        self.model = model
        self.family = StructuredMotif(x, y, d1, d2)
        self.x, self.y = self.family.x, self.family.y
        self.m, self.r = self.family.m, self.family.r
        self.d1, self.d2 = d1, d2
        k = len(model.alphabet)
        if k < 2:
            raise ConfigurationError("structured motifs need at least two symbols")
        self._others = [[b for b in range(k) if b != a] for a in range(k)]
        self._log_core = math.log(self.m + self.r + 1)
        self._log_sub = math.log(k - 1)
        self._log_d = math.log(d2 - d1 + 1)

    def draw(self, stream):
        core = list(self.x + self.y)
        k = stream.randint(0, len(core))
        if k:
            choices = self._others[core[k - 1]]
            core[k - 1] = choices[stream.randint(0, len(choices) - 1)]
        d = stream.randint(self.d1, self.d2)
        gap = self.model.generate_from(core[self.m - 1], d, stream)
        return tuple(core[: self.m]) + tuple(gap) + tuple(core[self.m :])

    def log_q_windows(self, ctx, length):
        count = ctx.n_windows(length)
        if not self.min_length <= length <= self.max_length or count == 0:
            return np.full(count, NEG_INF)
        key = ("structured-mm", id(self))
        parts = ctx.cache.get(key)
        if parts is None:
            parts = ctx.cache[key] = self.family._component_mismatches(ctx.seq)
        mism = self.family.window_mismatches(ctx.seq, length, parts)
        d = length - self.m - self.r
        lq = -self._log_core - self._log_d - (mism == 1) * self._log_sub + ctx.log_path(self.m - 1, d, count)
        return np.where(mism <= 1, lq, NEG_INF)

    def gamma(self, j):
        return _clamped_ramp(j, self.m + self.r, self.d1, self.d2)


def sampler_for(model: MarkovModel, family: PatternFamily, **kwargs) -> WordSampler:
    """Default sampler for a family."""
    if isinstance(family, ExplicitSet):
        return ExplicitSampler(model, family)
    if isinstance(family, Palindrome):
        return PalindromeSampler(model, family.m, kwargs.get("variant", JOINED))
    if isinstance(family, InvertedRepeat):
        pal = PalindromeSampler(model, family.m, kwargs.get("variant", SEPARATE))
        return InvertedRepeatSampler(pal, family.d1, family.d2)
    if isinstance(family, PswmMotif):
        keys = ("theta", "delta", "xi", "seed", "prepass")
        return PswmSampler(model, family.pswm, family.threshold, **{k: kwargs[k] for k in keys if k in kwargs})
    if isinstance(family, CoOccurrence):
        return CrmSampler(
            sampler_for(model, family.first, **kwargs),
            sampler_for(model, family.second, **kwargs),
            family.d1,
            family.d2,
        )
    if isinstance(family, StructuredMotif):
        return StructuredSampler(model, family.x, family.y, family.d1, family.d2)
    raise ConfigurationError(f"no sampler for {family!r}")


def beta_range(sampler: WordSampler, words) -> tuple[float, float]:
    betas = [sampler.beta(w) for w in words]
    return min(betas), max(betas)


def window_terms_scalar(sampler: WordSampler, s0: int, seq: Sequence[int]) -> list[tuple[int, int, float]]:
    """Sparse (start, length, term) list of :func:`window_terms`, one window at a time."""
    seq = tuple(int(x) for x in seq)
    n = len(seq)
    rows = sampler.model._log_sigma_rows
    out = []
    for ell in sampler.lengths():
        if ell > n:
            break
        for a in range(n - ell + 1):
            lb = sampler.log_beta(seq[a : a + ell])
            if lb != -math.inf:
                prev = seq[a - 1] if a else s0
                out.append((a, ell, lb - rows[prev][seq[a]]))
    return out


def window_terms(sampler: WordSampler, s0: int, body: SequenceContext) -> dict[int, np.ndarray]:
    """log beta(s_i..s_{i+ell-1}) - log sigma(s_{i-1} s_i) for every window of the body s_1..s_n.

    Lengths with no member window are omitted. Entry 0 of each array is the window starting at s_1.
    """
    out = {}
    seq = body.seq
    n = len(seq)
    if n == 0:
        return out
    prev = np.concatenate(([s0], seq[:-1]))
    log_sigma = sampler.model.log_sigma
    for ell in sampler.lengths():
        if ell > n:
            break
        lb = sampler.log_beta_windows(body, ell)
        if np.isneginf(lb).all():
            continue
        count = n - ell + 1
        out[ell] = lb - log_sigma[prev[:count], seq[:count]]
    return out
