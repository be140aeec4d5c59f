"""Pure-Python kernels: the fallback when the compiled extension is absent.

Semantics here are the contract; the Cython build must match these
functions output-for-output (asserted in the test suite).
"""

from __future__ import annotations

IMPLEMENTATION = "pure-python"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a; process-independent, unlike builtin hash()."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


def wordpiece_word(word: str, vocab, prefix: str, unk: str) -> list[str]:
    """Greedy longest-match-first segmentation of one word.

    Non-initial pieces carry the continuation prefix; a word with any
    unmatchable remainder maps to the single unknown token.
    """
    if word in vocab:
        return [word]
    pieces: list[str] = []
    start = 0
    n = len(word)
    while start < n:
        end = n
        found = None
        while start < end:
            piece = word[start:end]
            if start > 0:
                piece = prefix + piece
            if piece in vocab:
                found = piece
                break
            end -= 1
        if found is None:
            return [unk]
        pieces.append(found)
        start = end
    return pieces


def hashed_ngram_counts(tokens: list[str], n_features: int) -> dict[int, float]:
    """Signed hashed counts of unigrams and bigrams.

    Feature index is the FNV-1a hash modulo n_features; the hash's top bit
    picks the sign, which keeps collision noise roughly zero-mean.
    """
    counts: dict[int, float] = {}
    prev = None
    for tok in tokens:
        h = fnv1a64(tok.encode("utf-8"))
        idx = h % n_features
        counts[idx] = counts.get(idx, 0.0) + (1.0 if h >> 63 == 0 else -1.0)
        if prev is not None:
            h = fnv1a64((prev + " " + tok).encode("utf-8"))
            idx = h % n_features
            counts[idx] = counts.get(idx, 0.0) + (1.0 if h >> 63 == 0 else -1.0)
        prev = tok
    return counts
