"""Direct and importance-sampling estimators of p_c = P{N >= c}.

Replicate ``k`` of a run with master seed ``seed`` uses the stream keyed by
``(seed, k)``; contributions are collected in replicate order, so reports do not
depend on how many worker processes share the work.
"""
from __future__ import annotations

import math
import multiprocessing
import time
import warnings
from abc import ABC, abstractmethod
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from raremotif.errors import ConfigurationError
from raremotif.markov import MarkovModel
from raremotif.patterns import (
    PatternFamily,
    Pswm,
    count_nonoverlapping,
    count_profile,
    has_occurrence,
)
from raremotif.rng import Stream, replicate_stream
from raremotif.wordbank import (
    SCALAR_MAX_LEN,
    SequenceContext,
    WordSampler,
    build_tilted_tables,
    tail_probability,
    tilted_score_distribution,
    window_terms,
    window_terms_scalar,
)

# --- insertion policies ---------------------------------------------------------------


class InsertionPolicy(ABC):
    """rho_i = P{insert a word at position i + 1 | s_0..s_i}."""

    needs_count = False

    @abstractmethod
    def rho(self, i: int, count: int, n: int, c: int) -> float: ...

    def validate(self, min_length: int, n: int, c: int) -> None:
        """Reject policies that could force an insertion while N >= c is still reachable otherwise."""

    def spec(self) -> str:
        return type(self).__name__


class ConstantPolicy(InsertionPolicy):
    """rho_i = rate for every i; ``rate=None`` means c / n."""

    def __init__(self, rate: float | None = None):
        self.rate = rate

    def rho(self, i, count, n, c):
        return c / n if self.rate is None else self.rate

    def validate(self, min_length, n, c):
        rate = c / n if self.rate is None else self.rate
        if not 0 <= rate < 1:
            raise ConfigurationError(f"constant insertion probability must lie in [0, 1), got {rate:g}")

    def spec(self):
        return "constant" if self.rate is None else f"constant:{self.rate!r}"


class AdaptivePolicy(InsertionPolicy):
    """rho_i = min{1, ((c - N_i) / (n - i - (c - N_i)(m - 1)))^+}.

    ``word_length`` plays the role of m and defaults to the family's shortest
    word length; larger values would force insertions too early.
    """

    needs_count = True

    def __init__(self, word_length: int | None = None):
        self.word_length = word_length

    def bind(self, min_length: int) -> "AdaptivePolicy":
        return AdaptivePolicy(min_length if self.word_length is None else self.word_length)

    def rho(self, i, count, n, c):
        k = c - count
        if k <= 0:
            return 0.0
        den = n - i - k * (self.word_length - 1)
        if den <= 0:
            return 1.0 if den == 0 else 0.0
        return min(1.0, k / den)

    def validate(self, min_length, n, c):
        if self.word_length is None:
            raise ConfigurationError("adaptive policy has no word length; call bind() first")
        if not 1 <= self.word_length <= min_length:
            raise ConfigurationError(
                f"adaptive policy word length {self.word_length} must lie in [1, {min_length}]"
            )

    def spec(self):
        return "adaptive" if self.word_length is None else f"adaptive:{self.word_length}"


class TablePolicy(InsertionPolicy):
    """Position-indexed insertion probabilities, all in [0, 1)."""

    def __init__(self, values: Sequence[float]):
        self.values = [float(v) for v in values]

    def rho(self, i, count, n, c):
        return self.values[i]

    def validate(self, min_length, n, c):
        if len(self.values) < n:
            raise ConfigurationError(f"policy table has {len(self.values)} entries, need {n}")
        if any(not 0 <= v < 1 for v in self.values[:n]):
            raise ConfigurationError("table insertion probabilities must lie in [0, 1)")

    def spec(self):
        return "table:" + ",".join(repr(v) for v in self.values)


def prepare_policy(policy: InsertionPolicy, sampler: WordSampler, n: int, c: int) -> InsertionPolicy:
    if isinstance(policy, AdaptivePolicy):
        policy = policy.bind(sampler.min_length)
    policy.validate(sampler.min_length, n, c)
    return policy


# --- runs and reports -----------------------------------------------------------------


@dataclass
class SimRun:
    """One generated sequence ``s`` (s[0] is the dummy s_0) with its weight and count."""

    s: np.ndarray
    L: float = math.nan
    N: int = 0
    inserted: list[int] = field(default_factory=list)
    counts: list[int] | None = None


@dataclass
class EstimateReport:
    p_hat: float
    se: float
    K: int
    c: int
    n: int
    seed: int
    algorithm: str
    wall_time: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    FIELDS = ("algorithm", "p_hat", "se", "K", "n", "c", "seed", "wall_time")

    def values(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "p_hat": f"{self.p_hat:.6e}",
            "se": f"{self.se:.6e}",
            "K": str(self.K),
            "n": str(self.n),
            "c": str(self.c),
            "seed": str(self.seed),
            "wall_time": f"{self.wall_time:.3f}",
        }

    def to_tsv(self, header: bool = False) -> str:
        vals = self.values()
        line = "\t".join(vals[k] for k in self.FIELDS)
        return ("\t".join(self.FIELDS) + "\n" + line) if header else line

    def to_block(self) -> str:
        vals = self.values()
        lines = [f"{k} = {vals[k]}" for k in self.FIELDS]
        for key, val in self.diagnostics.items():
            lines.append(f"{key} = {val}")
        return "\n".join(lines)

    @classmethod
    def from_block(cls, text: str) -> "EstimateReport":
        vals = {}
        for line in text.splitlines():
            if "=" in line:
                k, v = line.split("=", 1)
                vals[k.strip()] = v.strip()
        return cls(
            p_hat=float(vals["p_hat"]),
            se=float(vals["se"]),
            K=int(vals["K"]),
            c=int(vals["c"]),
            n=int(vals["n"]),
            seed=int(vals["seed"]),
            algorithm=vals["algorithm"],
            wall_time=float(vals.get("wall_time", 0.0)),
        )

    def __str__(self) -> str:
        return f"{self.algorithm}: p = {self.p_hat:.4g} +- {self.se:.2g} (K={self.K})"


def importance_report(contrib: np.ndarray, **kw) -> EstimateReport:
    K = len(contrib)
    p = float(np.mean(contrib))
    se = float(np.std(contrib, ddof=1) / math.sqrt(K)) if K > 1 else 0.0
    return EstimateReport(p_hat=p, se=se, K=K, **kw)


def binomial_report(hits: np.ndarray, **kw) -> EstimateReport:
    K = len(hits)
    p = float(np.mean(hits))
    return EstimateReport(p_hat=p, se=math.sqrt(p * (1 - p) / K), K=K, **kw)


# --- replicate execution --------------------------------------------------------------


def _run_chunk(task: Callable[[Stream], tuple], seed: int, start: int, stop: int) -> list[tuple]:
    return [task(replicate_stream(seed, k)) for k in range(start, stop)]


def run_replicates(task: Callable[[Stream], tuple], K: int, seed: int, workers: int = 1) -> np.ndarray:
    """Evaluate ``task`` on replicates 0..K-1; rows are returned in replicate order."""
    if K < 1:
        raise ConfigurationError("need at least one replicate")
    workers = max(1, min(int(workers), K))
    if workers == 1:
        rows = _run_chunk(task, seed, 0, K)
    else:
        bounds = np.linspace(0, K, workers * 4 + 1).astype(int)
        chunks = [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            futures = [pool.submit(_run_chunk, task, seed, a, b) for a, b in chunks]
            rows = [row for fut in futures for row in fut.result()]
    return np.array(rows, dtype=float)


# --- likelihood ratios ----------------------------------------------------------------


def _split(s0) -> tuple[int, np.ndarray]:
    s = np.asarray(s0, dtype=np.intp)
    return int(s[0]), s[1:]


def _sparse_terms(first: int, body: np.ndarray, sampler: WordSampler, ctx=None) -> list[tuple[int, int, float]]:
    if len(body) <= SCALAR_MAX_LEN:
        return window_terms_scalar(sampler, first, body.tolist())
    ctx = SequenceContext(sampler.model, body) if ctx is None else ctx
    out = []
    for ell, terms in window_terms(sampler, first, ctx).items():
        out.extend((a, ell, float(terms[a])) for a in np.flatnonzero(np.isfinite(terms)).tolist())
    return out


def likelihood_a(s0, sampler: WordSampler, n: int | None = None) -> float:
    """Likelihood ratio of single-insertion sampling against the null chain.

    ``s0`` is the full sequence s_0 s_1..s_n including the dummy first symbol.
    """
    first, body = _split(s0)
    n = len(body) if n is None else n
    if n != len(body):
        raise ConfigurationError(f"sequence has {len(body)} symbols after s_0, expected {n}")
    return math.fsum(math.exp(t) / (n - ell + 1) for _, ell, t in _sparse_terms(first, body, sampler))


def likelihood_b(
    s0,
    sampler: WordSampler,
    policy: InsertionPolicy,
    c: int = 1,
    n: int | None = None,
    family: PatternFamily | None = None,
    counts: Sequence[int] | None = None,
) -> float:
    """Forward recursion for the insertion-chain likelihood ratio L_n.

    L_0 = 1 (s_0 has law pi under both measures) and L_i = 0 for i < 0.
    ``family`` is the counted family driving count-dependent policies; ``counts``
    may supply its running counts N_0..N_n.
    """
    first, body = _split(s0)
    n = len(body) if n is None else n
    if n != len(body):
        raise ConfigurationError(f"sequence has {len(body)} symbols after s_0, expected {n}")
    ctx = SequenceContext(sampler.model, body) if n > SCALAR_MAX_LEN else None
    if isinstance(policy, AdaptivePolicy) and policy.word_length is None:
        policy = policy.bind(sampler.min_length)
    family = sampler.family if family is None else family
    if not policy.needs_count:
        counts = [0] * (n + 1)
    elif counts is None:
        masks = ctx.masks(family) if ctx is not None else None
        counts = count_profile(family, body, masks)
    rho = [policy.rho(i, counts[i], n, c) for i in range(n)]
    gamma = sampler.gamma
    ends: dict[int, list[tuple[int, float]]] = {}
    for a, ell, t in _sparse_terms(first, body, sampler, ctx):
        ends.setdefault(a + ell, []).append((a, math.exp(t)))
    L = [0.0] * (n + 1)
    L[0] = 1.0
    for i in range(1, n + 1):
        val = (1.0 - rho[i - 1] * gamma(n - i + 1)) * L[i - 1]
        for a, b in ends.get(i, ()):
            val += rho[a] * L[a] * b
        L[i] = val
    return L[n]


# --- sequence generation --------------------------------------------------------------


def generate_a(model: MarkovModel, sampler: WordSampler, n: int, stream: Stream) -> SimRun:
    """One insertion at a uniform start, chain everywhere else."""
    v = sampler.draw(stream)
    ell = len(v)
    i0 = stream.randint(1, n - ell + 1)
    s0 = model.draw_initial(stream)
    prefix = model.generate_from(s0, i0 - 1, stream)
    suffix = model.generate_from(v[-1], n - (i0 - 1) - ell, stream)
    s = np.array([s0, *prefix, *v, *suffix], dtype=np.intp)
    return SimRun(s, inserted=[i0])


def generate_b(
    model: MarkovModel,
    sampler: WordSampler,
    policy: InsertionPolicy,
    n: int,
    c: int,
    stream: Stream,
    family: PatternFamily | None = None,
) -> SimRun:
    """Insertion chain: at each i < n insert a bank word with probability rho_i if it fits.

    A drawn word that does not fit is discarded and the chain emits one symbol
    instead. When the policy depends on N_i the running counts are kept in
    ``SimRun.counts``.
    """
    family = sampler.family if family is None else family
    s0 = model.draw_initial(stream)
    body: list[int] = []
    inserted = []
    tracking = policy.needs_count
    counts = [0]
    shortest = family.shortest_suffix
    rho_fn = policy.rho
    cdf = model._row_cdf
    rnd = stream.random
    last = s0
    i = 0

    def push(x: int) -> None:
        body.append(x)
        prev = counts[-1]
        j = shortest(body)
        # counts holds N_0..N_{len(body)-1} here, so counts[-j] is N_{len(body)-j}
        if j is not None and counts[-j] + 1 > prev:
            prev = counts[-j] + 1
        counts.append(prev)

    while i < n:
        r = rho_fn(i, counts[-1], n, c)
        if r > 0 and (r >= 1 or rnd() < r):
            v = sampler.draw(stream)
            if len(v) <= n - i:
                inserted.append(i + 1)
                if tracking:
                    for x in v:
                        push(x)
                else:
                    body.extend(v)
                last = v[-1]
                i += len(v)
                continue
        row = cdf[last]
        u = rnd()
        x = 0
        while row[x] <= u:
            x += 1
        if tracking:
            push(x)
        else:
            body.append(x)
        last = x
        i += 1
    run = SimRun(np.array([s0, *body], dtype=np.intp), N=counts[-1], inserted=inserted)
    if tracking:
        run.counts = counts
    return run


# --- replicate tasks (picklable) --------------------------------------------------------


@dataclass
class _DirectTask:
    model: MarkovModel
    family: PatternFamily
    n: int
    c: int

    def __call__(self, stream):
        s = self.model.generate(self.n, stream)
        N = count_nonoverlapping(self.family, s)
        return (float(N >= self.c), N, 0)


@dataclass
class _TaskA:
    model: MarkovModel
    sampler: WordSampler
    n: int

    def __call__(self, stream):
        run = generate_a(self.model, self.sampler, self.n, stream)
        L = likelihood_a(run.s, self.sampler, self.n)
        if not L > 0:
            raise RuntimeError("generated sequence has zero likelihood ratio")
        return (1.0 / L, 1, 1)


@dataclass
class _TaskB:
    model: MarkovModel
    sampler: WordSampler
    policy: InsertionPolicy
    n: int
    c: int

    def __call__(self, stream):
        run = generate_b(self.model, self.sampler, self.policy, self.n, self.c, stream)
        if self.policy.needs_count:
            N = run.N
        else:
            N = count_nonoverlapping(self.sampler.family, run.s[1:])
        if N < self.c:
            return (0.0, N, len(run.inserted))
        L = likelihood_b(run.s, self.sampler, self.policy, self.c, self.n, counts=run.counts)
        if not L > 0:
            raise RuntimeError("qualifying sequence has zero likelihood ratio")
        return (1.0 / L, N, len(run.inserted))


@dataclass
class _CombinedTask:
    model: MarkovModel
    samplers: list
    thresholds: list
    algorithm: str
    n: int
    policies: list

    def __call__(self, stream):
        J = len(self.samplers)
        # with one family no choice is drawn, so J = 1 replays the single-family estimator
        j = stream.randint(0, J - 1) if J > 1 else 0
        sampler = self.samplers[j]
        if self.algorithm == "A":
            run = generate_a(self.model, sampler, self.n, stream)
        else:
            run = generate_b(self.model, sampler, self.policies[j], self.n, self.thresholds[j], stream)
        body = run.s[1:]
        hits = [_reaches(s.family, body, c) for s, c in zip(self.samplers, self.thresholds)]
        if not hits[j]:
            return (0.0, sum(hits), j)
        if self.algorithm == "A":
            L = likelihood_a(run.s, sampler, self.n)
        else:
            L = likelihood_b(run.s, sampler, self.policies[j], self.thresholds[j], self.n, counts=run.counts)
        return (J / (L * sum(hits)), sum(hits), j)


def _reaches(family: PatternFamily, seq, c: int) -> bool:
    if c == 1:
        return has_occurrence(family, seq)
    return count_nonoverlapping(family, seq) >= c


# --- estimators ---------------------------------------------------------------------------


def direct_mc(
    model: MarkovModel, family: PatternFamily, n: int, c: int, K: int, seed: int, workers: int = 1
) -> EstimateReport:
    t0 = time.perf_counter()
    rows = run_replicates(_DirectTask(model, family, n, c), K, seed, workers)
    rep = binomial_report(rows[:, 0], c=c, n=n, seed=seed, algorithm="direct")
    rep.wall_time = time.perf_counter() - t0
    return rep


def algorithm_a(
    model: MarkovModel, sampler: WordSampler, n: int, K: int, seed: int, workers: int = 1
) -> EstimateReport:
    """Single random insertion; estimates P{N >= 1} only."""
    if n < sampler.max_length:
        raise ConfigurationError(f"n={n} is shorter than the longest word ({sampler.max_length})")
    t0 = time.perf_counter()
    rows = run_replicates(_TaskA(model, sampler, n), K, seed, workers)
    rep = importance_report(rows[:, 0], c=1, n=n, seed=seed, algorithm="is-a")
    rep.wall_time = time.perf_counter() - t0
    rep.diagnostics.update(sampler.diagnostics())
    return rep


def algorithm_b(
    model: MarkovModel,
    sampler: WordSampler,
    policy: InsertionPolicy,
    n: int,
    c: int,
    K: int,
    seed: int,
    workers: int = 1,
) -> EstimateReport:
    """Hidden-Markov insertion sampling for any c >= 1."""
    if c < 1:
        raise ConfigurationError("c must be at least 1")
    policy = prepare_policy(policy, sampler, n, c)
    if n < c * sampler.max_length:
        warnings.warn(f"n={n} is below c * max word length = {c * sampler.max_length}", stacklevel=2)
    t0 = time.perf_counter()
    rows = run_replicates(_TaskB(model, sampler, policy, n, c), K, seed, workers)
    rep = importance_report(rows[:, 0], c=c, n=n, seed=seed, algorithm="is-b")
    rep.wall_time = time.perf_counter() - t0
    rep.diagnostics.update(sampler.diagnostics())
    rep.diagnostics["mean_insertions"] = float(np.mean(rows[:, 2]))
    hist = np.bincount(rows[:, 2].astype(int))
    rep.diagnostics["insertion_histogram"] = " ".join(f"{i}:{h}" for i, h in enumerate(hist) if h)
    return rep


def combined(
    model: MarkovModel,
    samplers: Sequence[WordSampler],
    thresholds: Sequence[int],
    algorithm: str,
    n: int,
    K: int,
    seed: int,
    policies: Sequence[InsertionPolicy] | None = None,
    workers: int = 1,
) -> EstimateReport:
    """P{N^(j) >= c_j for some j}, inserting from a uniformly chosen family per replicate.

    Each replicate is weighted by J / |{j : N^(j) >= c_j}| so that sequences hit by
    several families are not over-counted.
    """
    algorithm = algorithm.upper().removeprefix("IS-")
    if algorithm not in ("A", "B"):
        raise ConfigurationError(f"combined estimator runs algorithm A or B, not {algorithm!r}")
    if len(samplers) < 1 or len(samplers) != len(thresholds):
        raise ConfigurationError("need one threshold per sampler")
    if algorithm == "A":
        if any(c != 1 for c in thresholds):
            raise ConfigurationError("algorithm A supports c = 1 only")
        if n < max(s.max_length for s in samplers):
            raise ConfigurationError("n is shorter than the longest word")
        prepared = [None] * len(samplers)
    else:
        policies = policies or [AdaptivePolicy() for _ in samplers]
        prepared = [prepare_policy(p, s, n, c) for p, s, c in zip(policies, samplers, thresholds)]
    t0 = time.perf_counter()
    task = _CombinedTask(model, list(samplers), list(thresholds), algorithm, n, prepared)
    rows = run_replicates(task, K, seed, workers)
    rep = importance_report(rows[:, 0], c=min(thresholds), n=n, seed=seed, algorithm=f"combined-{algorithm.lower()}")
    rep.wall_time = time.perf_counter() - t0
    return rep


def pswm_tail_probability(model: MarkovModel, pswm: Pswm, t: float) -> float:
    """P_pi{S(v_m) >= t} for v_1 ~ pi, by dynamic programming over (column, symbol, score)."""
    if t > pswm.max_score:
        return 0.0
    tables = build_tilted_tables(pswm, model, 0.0)
    return tail_probability(tilted_score_distribution(tables, pswm), t)


def huang_approx(model: MarkovModel, pswm: Pswm, t: float, n: int) -> float:
    """1 - (1 - P_pi{S >= t})^(n - m + 1), the independent-windows approximation for c = 1."""
    p = pswm_tail_probability(model, pswm, t)
    windows = n - pswm.m + 1
    if p <= 0 or windows <= 0:
        return 0.0
    if p >= 1:
        return 1.0
    return -math.expm1(windows * math.log1p(-p))
