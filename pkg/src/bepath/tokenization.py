"""Tokenizers and per-report token statistics.

Two tokenizer kinds: plain Unicode-whitespace splitting, and WordPiece
(greedy longest-match-first against a one-token-per-line vocabulary, the
de facto pretrained-vocabulary format, so real clinical vocabularies load
without conversion). Statistics are nearest-rank percentiles of per-report
token counts plus the share of reports over the 512-token mark that
separates short-input from long-input models.
"""

from __future__ import annotations

import csv
import functools
import io
from dataclasses import dataclass
from importlib import resources

from . import _kernels
from .corpus import Corpus


def demo_vocab_path() -> str:
    """Path of the bundled demonstration vocabulary."""
    return str(resources.files("bepath.data") / "demo_vocab.txt")


class VocabLoadError(ValueError):
    pass


class MissingField(ValueError):
    def __init__(self, report_id: str, field: str):
        self.report_id = report_id
        self.field = field
        super().__init__(f"report {report_id!r} has no {field} text")


@dataclass(frozen=True)
class TokenizerSpec:
    kind: str = "whitespace"  # whitespace | wordpiece
    vocab_path: str | None = None
    lowercase: bool = True
    continuation_prefix: str = "##"
    unknown_token: str = "[UNK]"
    # Sequence markers ([CLS]/[SEP]-style) are excluded from counts by
    # default so counts stay architecture-neutral; flip to include them.
    count_special_markers: bool = False

    def __post_init__(self):
        if self.kind not in ("whitespace", "wordpiece"):
            raise ValueError(f"unknown tokenizer kind {self.kind!r}")
        if self.kind == "wordpiece" and not self.vocab_path:
            raise ValueError("wordpiece tokenizer requires vocab_path")


@dataclass(frozen=True)
class TokenStats:
    min: int
    p25: int
    p50: int
    p75: int
    max: int
    pct_over_512: float

    def as_row(self) -> dict:
        return {
            "Min": self.min,
            "25p": self.p25,
            "50p": self.p50,
            "75p": self.p75,
            "Max": self.max,
            "%>512": round(self.pct_over_512, 1),
        }


@functools.lru_cache(maxsize=16)
def load_vocab(path: str) -> frozenset[str]:
    """Load a vocabulary file (one token per line, UTF-8)."""
    try:
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh]
    except OSError as exc:
        raise VocabLoadError(f"cannot read vocabulary {path!r}: {exc}") from None
    vocab = frozenset(t for t in tokens if t)
    if not vocab:
        raise VocabLoadError(f"vocabulary {path!r} is empty")
    return vocab


def _vocab_for(spec: TokenizerSpec) -> frozenset[str]:
    vocab = load_vocab(spec.vocab_path)
    if spec.unknown_token not in vocab:
        raise VocabLoadError(
            f"vocabulary {spec.vocab_path!r} lacks the unknown token {spec.unknown_token!r}"
        )
    return vocab


def tokenize(text: str, spec: TokenizerSpec) -> list[str]:
    """Deterministic tokenization of one text under the given spec."""
    if spec.lowercase:
        text = text.lower()
    words = text.split()
    if spec.kind == "whitespace":
        return words
    vocab = _vocab_for(spec)
    out: list[str] = []
    for word in words:
        out.extend(
            _kernels.wordpiece_word(word, vocab, spec.continuation_prefix, spec.unknown_token)
        )
    return out


def detokenize(tokens: list[str], spec: TokenizerSpec) -> list[str]:
    """Rebuild the word sequence from a wordpiece tokenization.

    Only meaningful for tokenizations without the unknown token.
    """
    words: list[str] = []
    prefix = spec.continuation_prefix
    for token in tokens:
        if token.startswith(prefix) and words:
            words[-1] += token[len(prefix):]
        else:
            words.append(token)
    return words


def count_tokens(text: str, spec: TokenizerSpec) -> int:
    n = len(tokenize(text, spec))
    if spec.count_special_markers:
        n += 2  # sequence start + end markers
    return n


def nearest_rank(sorted_values: list[int], percentile: int) -> int:
    """Nearest-rank percentile: the ceil(p/100 * n)-th order statistic."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("no values")
    if not 0 < percentile <= 100:
        raise ValueError("percentile must be in (0, 100]")
    rank = (percentile * n + 99) // 100
    return sorted_values[rank - 1]


def _field_text(report, field: str) -> str | None:
    if field == "full":
        return report.full_text
    if field == "subsection":
        return report.sub_section_text
    raise ValueError(f"unknown field {field!r}")


def token_stats(corpus: Corpus, spec: TokenizerSpec, field: str) -> TokenStats:
    """Token-count summary over one corpus field."""
    counts = []
    for report in corpus.reports:
        text = _field_text(report, field)
        if text is None:
            raise MissingField(report.report_id, field)
        counts.append(count_tokens(text, spec))
    counts.sort()
    n = len(counts)
    if n == 0:
        raise ValueError("corpus is empty")
    over = sum(1 for c in counts if c > 512)
    return TokenStats(
        min=counts[0],
        p25=nearest_rank(counts, 25),
        p50=nearest_rank(counts, 50),
        p75=nearest_rank(counts, 75),
        max=counts[-1],
        pct_over_512=100.0 * over / n,
    )


def stats_csv(
    corpus: Corpus,
    specs: list[tuple[str, TokenizerSpec]],
    fields: tuple[str, ...] = ("subsection", "full"),
) -> str:
    """One CSV row per (tokenizer, field), with the published column set."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["Tokenizer", "Text", "Min", "25p", "50p", "75p", "Max", "%>512"])
    for name, spec in specs:
        for field in fields:
            stats = token_stats(corpus, spec, field).as_row()
            writer.writerow(
                [name, field, stats["Min"], stats["25p"], stats["50p"],
                 stats["75p"], stats["Max"], stats["%>512"]]
            )
    return buf.getvalue()


def truncate_to_tokens(text: str, spec: TokenizerSpec, max_tokens: int) -> str:
    """Truncate at word granularity so at most max_tokens tokens remain.

    WordPiece segments each word independently, so keeping whole words
    whose cumulative piece count fits the budget guarantees the bound
    holds when the result is re-tokenized. The returned text is in
    canonical whitespace-joined (and, if configured, lowercased) form.
    """
    if max_tokens < 1:
        raise ValueError("max_tokens must be positive")
    words = (text.lower() if spec.lowercase else text).split()
    if spec.kind == "whitespace":
        kept = words[:max_tokens]
    else:
        vocab = _vocab_for(spec)
        kept = []
        budget = max_tokens
        for word in words:
            pieces = _kernels.wordpiece_word(
                word, vocab, spec.continuation_prefix, spec.unknown_token
            )
            if len(pieces) > budget:
                break
            kept.append(word)
            budget -= len(pieces)
    return " ".join(kept)
