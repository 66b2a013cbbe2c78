import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from raremotif import presets
from raremotif.errors import ConfigurationError, InputError
from raremotif.markov import Alphabet
from raremotif.patterns import (
    CoOccurrence,
    CountState,
    ExplicitSet,
    InvertedRepeat,
    Palindrome,
    Pswm,
    PswmMotif,
    StructuredMotif,
    count_incremental,
    count_nonoverlapping,
    count_profile,
    count_profile_scalar,
    format_pswm,
    has_occurrence,
    parse_pswm,
    shortest_match_lengths,
    shortest_suffix_match,
)

DNA = Alphabet.dna()
enc = DNA.encode


def explicit(*words):
    return ExplicitSet(enc(w) for w in words)


def max_packing(family, seq):
    """Largest number of disjoint member windows, by exhaustive search over choices."""
    seq = tuple(seq)
    n = len(seq)
    best = [0] * (n + 1)
    for end in range(1, n + 1):
        best[end] = best[end - 1]
        for start in range(end):
            if family.contains(seq[start:end]):
                best[end] = max(best[end], best[start] + 1)
    return best[n]


def literal_recursion(family, seq):
    """N_m = N_{m-j} + 1 with j the shortest suffix match, N_m = N_{m-1} otherwise."""
    counts = [0]
    for m in range(1, len(seq) + 1):
        j = family.shortest_suffix(tuple(seq[:m]))
        counts.append(counts[m - j] + 1 if j is not None else counts[m - 1])
    return counts


W_REP = presets.pswm("w_rep")
W_NOREP = presets.pswm("w_norep")
SWI5 = presets.pswm("swi5")
TOY_BINARY = Alphabet.from_symbols("ab", {"a": "b", "b": "a"})


class TestScore:
    def test_w_rep_all_a(self):
        assert W_REP.score(enc("a" * 12)) == 12

    def test_swi5_hand_sum(self):
        # 4 + 2 + 4 + 2 + 3 + 4 + 2 + 7 + 0 + 7 + 7 + 5
        assert SWI5.score(enc("agagcagggtgg")) == 47

    def test_w_norep_defining_word(self):
        assert W_NOREP.score(enc("acgttgcaacgt")) == 12
        assert W_NOREP.max_score == 12

    def test_swi5_max(self):
        assert SWI5.max_score == 59

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            SWI5.score(enc("acgt"))

    def test_window_scores_match_scalar(self):
        seq = np.array(enc("acgtagagcagggtggttac"))
        scores = SWI5.window_scores(seq)
        assert [SWI5.score(seq[i : i + 12]) for i in range(len(seq) - 11)] == scores.tolist()

    def test_file_round_trip(self):
        again = parse_pswm(format_pswm(SWI5, DNA))
        assert np.array_equal(again.weights, SWI5.weights)

    def test_parse_errors(self):
        with pytest.raises(InputError):
            parse_pswm("a c g t\n1 2\n1 2\n1 2\n")
        with pytest.raises(InputError):
            parse_pswm("a c\n1 2\n1\n")

    def test_threshold_above_max(self):
        with pytest.raises(ConfigurationError):
            PswmMotif(W_REP, 13)


class TestMembership:
    def test_palindrome(self):
        pal = Palindrome(3, DNA)
        assert pal.is_member(enc("acgcgt"))
        assert not pal.is_member(enc("acgcga"))

    def test_inverted_repeat(self):
        ir = InvertedRepeat(2, 1, 3, DNA)
        assert ir.is_member(enc("acgggt"))
        assert not ir.is_member(enc("acgt"))  # gap too short

    def test_structured_one_mismatch(self):
        fam = StructuredMotif(enc("gttgaca"), enc("atataat"), 16, 18)
        assert fam.is_member(enc("gttgacc" + "a" * 16 + "atataat"))
        assert not fam.is_member(enc("gttgacc" + "a" * 16 + "atataag"))
        assert not fam.is_member(enc("gttgaca" + "a" * 15 + "atataat"))

    def test_cooccurrence(self):
        fam = CoOccurrence(PswmMotif(W_REP, 11), PswmMotif(W_NOREP, 12), 0, 2)
        assert fam.is_member(enc("a" * 12 + "cc" + "acgttgcaacgt"))
        assert not fam.is_member(enc("a" * 12 + "ccc" + "acgttgcaacgt"))

    def test_pswm_iff_score(self):
        fam = PswmMotif(W_NOREP, 10)
        for word in itertools.islice(itertools.product(range(4), repeat=12), 0, 5000, 7):
            assert fam.is_member(word) == (W_NOREP.score(word) >= 10)


def families():
    return [
        explicit("at", "gca", "ttt"),
        Palindrome(2, DNA),
        InvertedRepeat(1, 0, 3, DNA),
        PswmMotif(Pswm.from_rows([[2, 0, 1], [0, 1, 0], [1, 2, 0], [0, 0, 2]]), 4),
        StructuredMotif(enc("ac"), enc("g"), 1, 2),
        CoOccurrence(explicit("a", "c"), explicit("gt"), 0, 2),
    ]


@pytest.mark.parametrize("family", families(), ids=repr)
@settings(max_examples=40, deadline=None)
@given(seq=st.lists(st.integers(0, 3), min_size=0, max_size=30))
def test_window_mask_matches_contains(family, seq):
    arr = np.array(seq, dtype=np.intp)
    for ell in family.lengths():
        if ell > len(seq):
            continue
        mask = family.window_mask(arr, ell)
        expected = [family.contains(tuple(seq[i : i + ell])) for i in range(len(seq) - ell + 1)]
        assert mask.tolist() == expected


@pytest.mark.parametrize("family", families(), ids=repr)
@settings(max_examples=40, deadline=None)
@given(seq=st.lists(st.integers(0, 3), min_size=1, max_size=40))
def test_count_paths_agree(family, seq):
    arr = np.array(seq, dtype=np.intp)
    vector = count_profile(family, arr, family.window_masks(arr))
    scalar = count_profile_scalar(family, seq)
    state = CountState.start(family)
    streamed = [0]
    for x in seq:
        state = count_incremental(state, x)
        streamed.append(state.N)
    assert vector == scalar == streamed
    assert vector[-1] == max_packing(family, seq)
    assert has_occurrence(family, arr) == (vector[-1] > 0)


class TestShortestSuffix:
    def test_examples(self):
        assert shortest_suffix_match(explicit("at"), enc("ccat")) == 2
        assert shortest_suffix_match(explicit("at", "gcat"), enc("ggcat")) == 2
        assert shortest_suffix_match(PswmMotif(W_REP, 12), enc("a" * 20)) == 12
        assert shortest_suffix_match(explicit("at"), enc("atc")) is None

    @pytest.mark.parametrize("family", families(), ids=repr)
    @settings(max_examples=40, deadline=None)
    @given(seq=st.lists(st.integers(0, 3), min_size=1, max_size=12))
    def test_definition(self, family, seq):
        j = shortest_suffix_match(family, seq)
        for ell in family.lengths():
            if ell > len(seq) or (j is not None and ell >= j):
                break
            assert not family.contains(tuple(seq[-ell:]))
        if j is not None:
            assert family.contains(tuple(seq[-j:]))

    def test_shortest_match_lengths(self):
        out = shortest_match_lengths(explicit("at", "cat"), enc("catat"))
        assert out.tolist() == [0, 0, 0, 2, 0, 2]


class TestCount:
    def test_at_in_atat(self):
        assert count_nonoverlapping(explicit("at"), enc("atat")) == 2

    def test_atat_in_atatat(self):
        assert count_nonoverlapping(explicit("atat"), enc("atatat")) == 1

    def test_shorter_than_min_length(self):
        assert count_nonoverlapping(PswmMotif(W_REP, 3), enc("a" * 11)) == 0
        assert count_nonoverlapping(explicit("at"), []) == 0

    def test_incremental_example(self):
        state = CountState.start(explicit("at"))
        assert state.N == 0
        seen = []
        for x in enc("atat"):
            state = count_incremental(state, x)
            seen.append(state.N)
        assert seen == [0, 1, 1, 2]

    def test_factor_family_counts_maximum_packing(self):
        # "a" is a factor of "caat"; the bare recursion would drop from 2 to 1 at the t
        fam = explicit("a", "caat")
        seq = enc("caat")
        assert literal_recursion(fam, seq) == [0, 0, 1, 2, 1]
        assert count_profile(fam, seq) == [0, 0, 1, 2, 2]
        assert max_packing(fam, seq) == 2

    def test_count_state_bounds(self):
        fam = explicit("at", "gc")
        rng = np.random.default_rng(3)
        state = CountState.start(fam)
        last = 0
        for x in rng.integers(0, 4, 500):
            state = state.advance(int(x))
            assert last <= state.N <= state.position // fam.min_length
            last = state.N

    def test_incremental_matches_batch_on_random_sequences(self):
        rng = np.random.default_rng(12)
        fam = explicit("at", "tat", "gg")
        for _ in range(10**4):
            seq = rng.integers(0, 4, rng.integers(1, 15)).tolist()
            state = CountState.start(fam)
            for x in seq:
                state = state.advance(x)
            assert state.N == count_nonoverlapping(fam, seq)


def _binary_words(max_len):
    return [w for ell in range(1, max_len + 1) for w in itertools.product((0, 1), repeat=ell)]


@settings(max_examples=200, deadline=None)
@given(
    words=st.lists(st.sampled_from(_binary_words(4)), min_size=1, max_size=4),
    seq=st.lists(st.integers(0, 1), min_size=0, max_size=12),
)
def test_binary_count_equals_exhaustive_packing(words, seq):
    fam = ExplicitSet(words)
    assert count_nonoverlapping(fam, seq) == max_packing(fam, seq)
    factor_free = not any(a != b and _is_factor(a, b) for a in fam.words for b in fam.words)
    if factor_free:
        assert literal_recursion(fam, seq)[-1] == max_packing(fam, seq)


def test_all_short_binary_sequences_small_family():
    fam = ExplicitSet([(0, 1), (1, 1, 0), (0, 0, 0)])
    for n in range(13):
        for seq in itertools.product((0, 1), repeat=n):
            assert count_nonoverlapping(fam, seq) == max_packing(fam, seq)


def _is_factor(a, b):
    return len(a) < len(b) and any(b[i : i + len(a)] == a for i in range(len(b) - len(a) + 1))


@settings(max_examples=100, deadline=None)
@given(seq=st.lists(st.integers(0, 3), min_size=12, max_size=60), t=st.integers(0, 11))
def test_raising_threshold_never_increases_count(seq, t):
    assert count_nonoverlapping(PswmMotif(W_NOREP, t + 1), seq) <= count_nonoverlapping(PswmMotif(W_NOREP, t), seq)
