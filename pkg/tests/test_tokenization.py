import datetime
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bepath._kernels import _purepy
from bepath.corpus import Corpus, PathologyReport
from bepath.tokenization import (
    MissingField,
    TokenizerSpec,
    VocabLoadError,
    count_tokens,
    demo_vocab_path,
    load_vocab,
    nearest_rank,
    stats_csv,
    token_stats,
    tokenize,
    truncate_to_tokens,
)

try:
    from bepath._kernels import _speedups
except ImportError:
    _speedups = None

needs_speedups = pytest.mark.skipif(_speedups is None, reason="compiled extension not built")

# Published FNV-1a 64-bit test vectors.
FNV_VECTORS = {
    b"": 0xCBF29CE484222325,
    b"a": 0xAF63DC4C8601EC8C,
    b"hello": 0xA430D84680AABD0B,
}


def reference_wordpiece(word, vocab, prefix="##", unk="[UNK]"):
    """Greedy longest-match-first, written independently of the kernel:
    at each position take the longest vocabulary piece via max() over all
    matching candidates."""
    pieces = []
    start = 0
    while start < len(word):
        candidates = []
        for end in range(start + 1, len(word) + 1):
            piece = word[start:end] if start == 0 else prefix + word[start:end]
            if piece in vocab:
                candidates.append((end, piece))
        if not candidates:
            return [unk]
        end, piece = max(candidates)
        pieces.append(piece)
        start = end
    return pieces if pieces else [unk]


def _text_corpus(texts):
    return Corpus(
        [
            PathologyReport(
                report_id=f"r{i}",
                patient_id=f"p{i}",
                collected_date=datetime.date(2016, 1, 1),
                full_text=text,
                sub_section_text=text.split("\n")[-1],
            )
            for i, text in enumerate(texts)
        ]
    )


class TestHashing:
    def test_frozen_vectors(self):
        for data, expected in FNV_VECTORS.items():
            assert _purepy.fnv1a64(data) == expected

    @needs_speedups
    def test_compiled_matches_frozen_vectors(self):
        for data, expected in FNV_VECTORS.items():
            assert _speedups.fnv1a64(data) == expected

    @needs_speedups
    @settings(max_examples=300, deadline=None)
    @given(st.binary(max_size=64))
    def test_implementations_agree(self, data):
        assert _speedups.fnv1a64(data) == _purepy.fnv1a64(data)


class TestHashedNgrams:
    def test_matches_by_hand_construction(self):
        tokens = ["ab", "cd", "ab"]
        n = 1 << 10
        expected = {}
        for gram in ["ab", "cd", "ab", "ab cd", "cd ab"]:
            h = _purepy.fnv1a64(gram.encode())
            sign = 1.0 if h < 2 ** 63 else -1.0
            expected[h % n] = expected.get(h % n, 0.0) + sign
        assert _purepy.hashed_ngram_counts(tokens, n) == expected

    def test_empty_and_single(self):
        assert _purepy.hashed_ngram_counts([], 16) == {}
        single = _purepy.hashed_ngram_counts(["x"], 16)
        assert len(single) == 1

    @needs_speedups
    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.text(st.characters(codec="ascii"), min_size=1, max_size=6), max_size=12))
    def test_implementations_agree(self, tokens):
        assert _speedups.hashed_ngram_counts(tokens, 1 << 18) == _purepy.hashed_ngram_counts(
            tokens, 1 << 18
        )


WORD_ALPHABET = "abcde-"
piece_strategy = st.text(WORD_ALPHABET, min_size=1, max_size=4)
vocab_strategy = st.builds(
    lambda initial, continuation: frozenset(initial) | frozenset("##" + p for p in continuation),
    st.sets(piece_strategy, max_size=12),
    st.sets(piece_strategy, max_size=12),
)


class TestWordpiece:
    def test_frozen_segmentations(self):
        vocab = frozenset(["un", "aff", "##aff", "##able", "##b", "a", "##a", "hyphen-ated"])
        cases = {
            "unaffable": ["un", "##aff", "##able"],
            "affable": ["aff", "##able"],
            "hyphen-ated": ["hyphen-ated"],
        }
        for word, pieces in cases.items():
            assert _purepy.wordpiece_word(word, vocab, "##", "[UNK]") == pieces
        # Unmatchable remainder turns the whole word into [UNK], even
        # when a prefix matched.
        assert _purepy.wordpiece_word("unz", vocab, "##", "[UNK]") == ["[UNK]"]
        assert _purepy.wordpiece_word("z", vocab, "##", "[UNK]") == ["[UNK]"]

    def test_whole_word_beats_pieces(self):
        vocab = frozenset(["ab", "##cd", "abcd"])
        assert _purepy.wordpiece_word("abcd", vocab, "##", "[UNK]") == ["abcd"]

    @settings(max_examples=500, deadline=None)
    @given(st.text(WORD_ALPHABET, min_size=1, max_size=10), vocab_strategy)
    def test_matches_independent_reference(self, word, vocab):
        assert _purepy.wordpiece_word(word, vocab, "##", "[UNK]") == reference_wordpiece(
            word, vocab
        )

    @needs_speedups
    @settings(max_examples=500, deadline=None)
    @given(st.text(WORD_ALPHABET, min_size=1, max_size=10), vocab_strategy)
    def test_implementations_agree(self, word, vocab):
        assert _speedups.wordpiece_word(word, vocab, "##", "[UNK]") == _purepy.wordpiece_word(
            word, vocab, "##", "[UNK]"
        )

    @settings(max_examples=300, deadline=None)
    @given(st.text(WORD_ALPHABET, min_size=1, max_size=10), vocab_strategy)
    def test_pieces_reassemble(self, word, vocab):
        pieces = _purepy.wordpiece_word(word, vocab, "##", "[UNK]")
        if pieces == ["[UNK]"]:
            return
        assert pieces[0] + "".join(p[2:] for p in pieces[1:]) == word
        assert all(p.startswith("##") for p in pieces[1:])


class TestTokenize:
    def test_whitespace_lowercases_and_splits(self):
        spec = TokenizerSpec()
        assert tokenize("Barrett's  Esophagus\nBIOPSY", spec) == [
            "barrett's",
            "esophagus",
            "biopsy",
        ]

    def test_lowercase_off(self):
        spec = TokenizerSpec(lowercase=False)
        assert tokenize("Keep Case", spec) == ["Keep", "Case"]

    def test_wordpiece_requires_vocab(self):
        with pytest.raises(ValueError):
            TokenizerSpec(kind="wordpiece")
        with pytest.raises(ValueError):
            TokenizerSpec(kind="sentencepiece")

    def test_wordpiece_end_to_end(self, tmp_path):
        vocab = tmp_path / "v.txt"
        vocab.write_text("[UNK]\nbar\n##rett\nbiopsy\n")
        spec = TokenizerSpec(kind="wordpiece", vocab_path=str(vocab))
        assert tokenize("Barrett biopsy unknown", spec) == [
            "bar",
            "##rett",
            "biopsy",
            "[UNK]",
        ]

    def test_count_tokens_with_markers(self):
        spec = TokenizerSpec(count_special_markers=True)
        assert count_tokens("one two", spec) == 4
        assert count_tokens("one two", TokenizerSpec()) == 2

    def test_vocab_errors(self, tmp_path):
        with pytest.raises(VocabLoadError):
            load_vocab(str(tmp_path / "absent.txt"))
        empty = tmp_path / "empty.txt"
        empty.write_text("\n\n")
        with pytest.raises(VocabLoadError):
            load_vocab(str(empty))
        no_unk = tmp_path / "nounk.txt"
        no_unk.write_text("token\n")
        spec = TokenizerSpec(kind="wordpiece", vocab_path=str(no_unk))
        with pytest.raises(VocabLoadError):
            tokenize("token", spec)

    def test_demo_vocab_covers_ascii(self):
        vocab = load_vocab(demo_vocab_path())
        assert "[UNK]" in vocab
        spec = TokenizerSpec(kind="wordpiece", vocab_path=demo_vocab_path())
        assert "[UNK]" not in tokenize("totally-novel gibberish 123", spec)


class TestNearestRank:
    def test_frozen_examples(self):
        values = [10, 20, 30, 40]
        assert nearest_rank(values, 25) == 10
        assert nearest_rank(values, 50) == 20
        assert nearest_rank(values, 75) == 30
        assert nearest_rank(values, 100) == 40
        assert nearest_rank([5], 50) == 5

    @settings(max_examples=300, deadline=None)
    @given(
        st.lists(st.integers(0, 1000), min_size=1, max_size=40),
        st.integers(1, 100),
    )
    def test_matches_ceil_oracle(self, values, percentile):
        values.sort()
        expected = values[math.ceil(percentile * len(values) / 100) - 1]
        assert nearest_rank(values, percentile) == expected

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            nearest_rank([1], 0)
        with pytest.raises(ValueError):
            nearest_rank([1], 101)


class TestTokenStats:
    def test_frozen_summary(self):
        texts = [" ".join(["tok"] * n) for n in range(1, 11)]
        corpus = _text_corpus(texts)
        stats = token_stats(corpus, TokenizerSpec(), "full")
        assert (stats.min, stats.p25, stats.p50, stats.p75, stats.max) == (1, 3, 5, 8, 10)
        assert stats.pct_over_512 == 0.0

    def test_pct_over_512(self):
        corpus = _text_corpus(["short", " ".join(["x"] * 513)])
        stats = token_stats(corpus, TokenizerSpec(), "full")
        assert stats.pct_over_512 == 50.0
        assert stats.max == 513

    def test_missing_subsection_field(self):
        corpus = Corpus(
            [
                PathologyReport(
                    report_id="r0",
                    patient_id="p0",
                    collected_date=datetime.date(2016, 1, 1),
                    full_text="abc",
                )
            ]
        )
        with pytest.raises(MissingField):
            token_stats(corpus, TokenizerSpec(), "subsection")

    def test_stats_csv_columns(self):
        corpus = _text_corpus(["one two", "three four five"])
        text = stats_csv(corpus, [("ws", TokenizerSpec())])
        lines = text.strip().splitlines()
        assert lines[0] == "Tokenizer,Text,Min,25p,50p,75p,Max,%>512"
        assert len(lines) == 3
        assert lines[1].startswith("ws,subsection,")
        assert lines[2].startswith("ws,full,")


class TestTruncate:
    def test_whitespace_prefix(self):
        spec = TokenizerSpec()
        assert truncate_to_tokens("a b c d", spec, 2) == "a b"
        assert truncate_to_tokens("a b", spec, 10) == "a b"

    def test_wordpiece_drops_straddling_word(self, tmp_path):
        vocab = tmp_path / "v.txt"
        vocab.write_text("[UNK]\naa\n##bb\ncc\n")
        spec = TokenizerSpec(kind="wordpiece", vocab_path=str(vocab))
        # "aabb" is two pieces; with a budget of 2 after "cc" it cannot fit.
        assert truncate_to_tokens("cc aabb cc", spec, 2) == "cc"
        assert truncate_to_tokens("cc aabb", spec, 3) == "cc aabb"

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.text(WORD_ALPHABET, min_size=1, max_size=6), max_size=30), st.integers(1, 20))
    def test_budget_holds_after_retokenization(self, words, budget):
        spec = TokenizerSpec(kind="wordpiece", vocab_path=demo_vocab_path())
        text = " ".join(words)
        cut = truncate_to_tokens(text, spec, budget)
        assert len(tokenize(cut, spec)) <= budget
        # Token sequence of the truncated text is a prefix of the original's.
        assert tokenize(cut, spec) == tokenize(text, spec)[: len(tokenize(cut, spec))]

    def test_rejects_nonpositive_budget(self):
        with pytest.raises(ValueError):
            truncate_to_tokens("x", TokenizerSpec(), 0)
