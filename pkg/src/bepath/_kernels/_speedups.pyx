# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled kernels for the hot loops: WordPiece matching and feature hashing.

Must stay output-identical to bepath._kernels._purepy; the test suite
compares the two implementations directly.
"""

from libc.stdint cimport uint64_t

IMPLEMENTATION = "cython"

cdef uint64_t FNV_OFFSET = 0xCBF29CE484222325u
cdef uint64_t FNV_PRIME = 0x100000001B3u


cdef uint64_t _fnv1a64_bytes(const unsigned char[:] data) nogil:
    cdef uint64_t h = FNV_OFFSET
    cdef Py_ssize_t i
    for i in range(data.shape[0]):
        h = (h ^ <uint64_t>data[i]) * FNV_PRIME
    return h


def fnv1a64(bytes data):
    return _fnv1a64_bytes(data)


def wordpiece_word(str word, vocab, str prefix, str unk):
    cdef Py_ssize_t start = 0
    cdef Py_ssize_t end
    cdef Py_ssize_t n = len(word)
    cdef str piece
    if word in vocab:
        return [word]
    pieces = []
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


def hashed_ngram_counts(list tokens, long long n_features):
    cdef uint64_t h
    cdef long long idx
    cdef Py_ssize_t i
    cdef str tok
    cdef str prev = None
    counts = {}
    for i in range(len(tokens)):
        tok = <str>tokens[i]
        raw = tok.encode("utf-8")
        h = _fnv1a64_bytes(raw)
        idx = <long long>(h % <uint64_t>n_features)
        counts[idx] = counts.get(idx, 0.0) + (1.0 if (h >> 63) == 0 else -1.0)
        if prev is not None:
            raw = (prev + " " + tok).encode("utf-8")
            h = _fnv1a64_bytes(raw)
            idx = <long long>(h % <uint64_t>n_features)
            counts[idx] = counts.get(idx, 0.0) + (1.0 if (h >> 63) == 0 else -1.0)
        prev = tok
    return counts
