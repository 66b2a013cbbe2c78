"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Published reference values live in ``raremotif.presets``; every comparison uses
the combined standard error sqrt(se^2 + se_ref^2) unless stated otherwise.
"""
import collections
import math
import time
import warnings

import numpy as np
import pytest
from scipy.stats import chisquare

from raremotif import presets
from raremotif.estimators import (
    AdaptivePolicy,
    algorithm_a,
    algorithm_b,
    combined,
    direct_mc,
    huang_approx,
)
from raremotif.markov import Alphabet, MarkovModel
from raremotif.oracle import exact_pvalue, exact_q, exact_union_pvalue, family_members, total_path_prob
from raremotif.patterns import ExplicitSet, Pswm, PswmMotif, StructuredMotif
from raremotif.rng import auxiliary_stream
from raremotif.wordbank import (
    CrmSampler,
    ExplicitSampler,
    InvertedRepeatSampler,
    PalindromeSampler,
    PswmSampler,
    StructuredSampler,
    beta_range,
    mean_score,
    sampler_for,
    solve_theta,
)

SEED = 1
DNA = Alphabet.dna()
BIN = Alphabet.from_symbols("ab", {"a": "b", "b": "a"})
BIN_CHAIN = MarkovModel(BIN, [[0.7, 0.3], [0.4, 0.6]])
TOY_PSWM = Pswm.from_rows([[2, 0, 1], [0, 2, 0]])  # rows: a, b


def verdict(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def z_score(est, se, ref, ref_se):
    return (est - ref) / math.hypot(se, ref_se)


# --- 1 ----------------------------------------------------------------------------------


def test_criterion_1_huang_approximation(capsys):
    uniform = presets.model("uniform")
    t0 = time.perf_counter()
    lines, ok = [], True
    for name in ("w_rep", "w_norep"):
        pswm = presets.pswm(name)
        for t, ref in zip(presets.TABLE1_THRESHOLDS, presets.TABLE1_ANALYTIC):
            got = huang_approx(uniform, pswm, t, presets.TABLE1_N)
            ok &= float(f"{got:.1e}") == ref
            lines.append(f"{name} t={t} {got:.3e} (ref {ref:.1e})")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 1.0
    verdict(capsys, 1, ok, "; ".join(lines) + f"; {elapsed:.2f}s")


# --- 2 ----------------------------------------------------------------------------------


def test_criterion_2_table1_algorithm_a(capsys):
    uniform = presets.model("uniform")
    K = 10_000
    t0 = time.perf_counter()
    lines, ok = [], True
    for name, refs in presets.TABLE1_ALGORITHM_A.items():
        pswm = presets.pswm(name)
        for t, (ref, ref_se) in zip(presets.TABLE1_THRESHOLDS, refs):
            sampler = sampler_for(uniform, PswmMotif(pswm, t), seed=SEED)
            rep = algorithm_a(uniform, sampler, presets.TABLE1_N, K, SEED)
            z = z_score(rep.p_hat, rep.se, ref, ref_se)
            ok &= abs(z) <= 4
            lines.append(f"{name} t={t} {rep.p_hat:.3e}+-{rep.se:.1e} z={z:+.2f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120
    verdict(capsys, 2, ok, "; ".join(lines) + f"; {elapsed:.0f}s")


# --- 3 ----------------------------------------------------------------------------------


def test_criterion_3_table2_algorithm_b(capsys):
    model = presets.model("swi5-background")
    sampler = sampler_for(model, PswmMotif(presets.pswm("swi5"), presets.TABLE2_THRESHOLD), seed=SEED)
    K = 10_000
    t0 = time.perf_counter()
    lines, ok = [], True
    for c, (ref, ref_se) in zip(presets.TABLE2_COUNTS, presets.TABLE2_ALGORITHM_B):
        rep = algorithm_b(model, sampler, AdaptivePolicy(), presets.TABLE2_N, c, K, SEED)
        z = z_score(rep.p_hat, rep.se, ref, ref_se)
        ok &= abs(z) <= 4
        lines.append(f"c={c} {rep.p_hat:.3e}+-{rep.se:.1e} z={z:+.2f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    verdict(capsys, 3, ok, "; ".join(lines) + f"; {elapsed:.0f}s")


# --- 4 ----------------------------------------------------------------------------------


def test_criterion_4_table3_structured(capsys):
    model = presets.model("motif-background")
    gap = (16, 18)
    refs = presets.TABLE3[gap]
    K = 10_000
    t0 = time.perf_counter()
    samplers = [
        StructuredSampler(model, model.encode(r.x), model.encode(r.y), *gap) for r in refs
    ]
    row1 = algorithm_a(model, samplers[0], presets.TABLE3_N, K, SEED)
    z1 = z_score(row1.p_hat, row1.se, *refs[0].algorithm_a)
    rel = row1.p_hat / refs[0].analytic - 1
    comb = combined(model, samplers, [1] * len(samplers), "A", presets.TABLE3_N, K, SEED)
    ref, ref_se = presets.TABLE3_COMBINED[gap][1]
    zc = z_score(comb.p_hat, comb.se, ref, ref_se)
    elapsed = time.perf_counter() - t0
    parts = {
        "row1 vs IS": abs(z1) <= 4,
        "row1 vs analytic": abs(rel) <= 0.10,
        "combined": abs(zc) <= 4,
        "runtime": elapsed < 300,
    }
    detail = (
        f"row1 {row1.p_hat:.4e}+-{row1.se:.1e} z={z1:+.2f}, {rel:+.1%} vs analytic; "
        f"combined {comb.p_hat:.3e}+-{comb.se:.1e} z={zc:+.1f} vs {ref:.2e}; {elapsed:.0f}s; "
        + ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in parts.items())
    )
    verdict(capsys, 4, all(parts.values()), detail)


# --- 5 ----------------------------------------------------------------------------------


def toy_instances():
    dna_chain = presets.model("swi5-background")
    enc = DNA.encode
    benc = BIN.encode
    return [
        ("explicit", dna_chain, 6,
         ExplicitSampler(dna_chain, ExplicitSet([enc("at"), enc("gca")])),
         ExplicitSampler(dna_chain, ExplicitSet([enc("gg")])), "A"),
        ("palindrome", dna_chain, 6,
         PalindromeSampler(dna_chain, 1),
         ExplicitSampler(dna_chain, ExplicitSet([enc("cc")])), "B"),
        ("inverted", dna_chain, 6,
         InvertedRepeatSampler(PalindromeSampler(dna_chain, 1, "separate"), 0, 1),
         ExplicitSampler(dna_chain, ExplicitSet([enc("gg")])), "A"),
        ("pswm", BIN_CHAIN, 12,
         PswmSampler(BIN_CHAIN, TOY_PSWM, 4, xi="exact"),
         ExplicitSampler(BIN_CHAIN, ExplicitSet([benc("bbbb")])), "B"),
        ("crm", BIN_CHAIN, 12,
         CrmSampler(PswmSampler(BIN_CHAIN, TOY_PSWM, 4, xi="exact"), PalindromeSampler(BIN_CHAIN, 1), 0, 1),
         ExplicitSampler(BIN_CHAIN, ExplicitSet([benc("bbbbb")])), "A"),
        ("structured", dna_chain, 6,
         StructuredSampler(dna_chain, enc("ac"), enc("g"), 0, 1),
         ExplicitSampler(dna_chain, ExplicitSet([enc("tt")])), "B"),
    ]


def test_criterion_5_oracle_unbiasedness(capsys):
    K = 100_000
    t0 = time.perf_counter()
    lines, ok = [], True
    for name, model, n, sampler, partner, comb_alg in toy_instances():
        fam = sampler.family
        p1 = exact_pvalue(model, fam, n, 1).p_exact
        p2 = exact_pvalue(model, fam, n, 2).p_exact
        pu = exact_union_pvalue(model, [fam, partner.family], [1, 1], n)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            runs = {
                "direct": (direct_mc(model, fam, n, 1, K, SEED), p1),
                "A": (algorithm_a(model, sampler, n, K, SEED), p1),
                "B1": (algorithm_b(model, sampler, AdaptivePolicy(), n, 1, K, SEED), p1),
                "B2": (algorithm_b(model, sampler, AdaptivePolicy(), n, 2, K, SEED), p2),
                f"J2-{comb_alg}": (combined(model, [sampler, partner], [1, 1], comb_alg, n, K, SEED), pu),
            }
        zs = []
        for label, (rep, exact) in runs.items():
            z = (rep.p_hat - exact) / rep.se
            ok &= abs(z) <= 4
            zs.append(f"{label}{z:+.1f}")
        lines.append(f"{name}[{' '.join(zs)}]")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    verdict(capsys, 5, ok, " ".join(lines) + f"; {elapsed:.0f}s")


# --- 6 ----------------------------------------------------------------------------------


def chi_square_p(sampler, q, draws=100_000, seed=SEED):
    stream = auxiliary_stream(seed, 6)
    counts = collections.Counter(sampler.draw(stream) for _ in range(draws))
    if not set(counts) <= set(q):
        return 0.0
    words = sorted(q)
    expected = np.array([q[w] * draws for w in words])
    observed = np.array([counts.get(w, 0) for w in words], dtype=float)
    small = expected < 5
    if small.any():
        expected = np.append(expected[~small], expected[small].sum())
        observed = np.append(observed[~small], observed[small].sum())
    return float(chisquare(observed, expected * observed.sum() / expected.sum()).pvalue)


def test_criterion_6_sampler_distributions(capsys):
    chain = presets.model("swi5-background")
    enc = DNA.encode
    samplers = {
        "palindrome-m1": PalindromeSampler(chain, 1),
        "palindrome-m2-joined": PalindromeSampler(chain, 2, "joined"),
        "palindrome-m2-separate": PalindromeSampler(chain, 2, "separate"),
        "tilted-pswm-m3": PswmSampler(BIN_CHAIN, TOY_PSWM, 4, xi="exact"),
        "crm": CrmSampler(PswmSampler(BIN_CHAIN, TOY_PSWM, 4, xi="exact"), PalindromeSampler(BIN_CHAIN, 1), 0, 2),
        "structured": StructuredSampler(chain, enc("ac"), enc("g"), 1, 2),
    }
    enumerable = dict(samplers)
    enumerable["explicit"] = ExplicitSampler(chain, ExplicitSet([enc("at"), enc("gca"), enc("t")]))
    enumerable["inverted"] = InvertedRepeatSampler(PalindromeSampler(chain, 1, "separate"), 0, 2)
    lines, ok = [], True
    for name, sampler in samplers.items():
        p = chi_square_p(sampler, exact_q(sampler))
        ok &= p > 0.001
        lines.append(f"{name} p={p:.3f}")
    for name, sampler in enumerable.items():
        members = family_members(sampler.family, len(sampler.model.alphabet))
        total = math.fsum(sampler.q(w) for w in members)
        lo, hi = beta_range(sampler, members)
        inv = 1 / total_path_prob(sampler.model, members)
        good = abs(total - 1) < 1e-10 and lo <= inv * (1 + 1e-12) and inv <= hi * (1 + 1e-12)
        ok &= good
        if not good:
            lines.append(f"{name} sum q={total:.12f} beta range [{lo:.4g}, {hi:.4g}] vs {inv:.4g}")
    lines.append(f"sum q and beta bound checked on {len(enumerable)} families")
    verdict(capsys, 6, ok, "; ".join(lines))


# --- 7 ----------------------------------------------------------------------------------


def test_criterion_7_theta_solver(capsys):
    theta_rep = solve_theta(presets.pswm("w_rep"), 9, presets.model("uniform"))
    err = abs(theta_rep - math.log(9))
    chain = presets.model("swi5-background")
    swi5 = presets.pswm("swi5")
    theta_swi5 = solve_theta(swi5, 50, chain)
    residual = abs(mean_score(swi5, chain, theta_swi5) - 50)
    ok = err < 1e-9 and residual < 1e-9
    verdict(capsys, 7, ok, f"|theta - ln 9| = {err:.1e}; SWI5 theta = {theta_swi5:.6f}, residual {residual:.1e}")


# --- 8 ----------------------------------------------------------------------------------


def test_criterion_8_variance_reduction(capsys):
    uniform = presets.model("uniform")
    sampler = sampler_for(uniform, PswmMotif(presets.pswm("w_norep"), 11), seed=SEED)
    K = 1000
    rep = algorithm_a(uniform, sampler, presets.TABLE1_N, K, SEED)
    direct = direct_mc(uniform, sampler.family, presets.TABLE1_N, 1, K, SEED)
    binomial = math.sqrt(rep.p_hat * (1 - rep.p_hat) / K)
    ratio = rep.se / binomial
    ok = ratio < 0.25
    verdict(
        capsys, 8, ok,
        f"IS SE {rep.se:.2e} vs binomial SE {binomial:.2e} at p={rep.p_hat:.2e} (ratio {ratio:.3f}); "
        f"direct MC run p={direct.p_hat:.1e}+-{direct.se:.1e}",
    )


# --- 9 ----------------------------------------------------------------------------------


def test_criterion_9_determinism(capsys):
    chain = presets.model("swi5-background")
    uniform = presets.model("uniform")
    pswm_sampler = sampler_for(uniform, PswmMotif(presets.pswm("w_norep"), 10), seed=SEED)
    pal = PalindromeSampler(chain, 2)
    structured = [
        StructuredSampler(chain, DNA.encode(r.x), DNA.encode(r.y), 16, 18) for r in presets.TABLE3[(16, 18)][:3]
    ]
    runs = {
        "direct": lambda w: direct_mc(chain, pal.family, 40, 2, 3000, SEED, workers=w),
        "is-a": lambda w: algorithm_a(uniform, pswm_sampler, 200, 2000, SEED, workers=w),
        "is-b": lambda w: algorithm_b(chain, pal, AdaptivePolicy(), 40, 3, 2000, SEED, workers=w),
        "combined": lambda w: combined(chain, structured, [1, 1, 1], "A", 100, 1000, SEED, workers=w),
    }
    lines, ok = [], True
    for name, run in runs.items():
        one, eight = run(1), run(8)
        same = (one.p_hat, one.se) == (eight.p_hat, eight.se)
        ok &= same
        lines.append(f"{name} {'identical' if same else 'DIFFERENT'} ({one.p_hat:.6e})")
    verdict(capsys, 9, ok, "; ".join(lines))
