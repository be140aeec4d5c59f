"""Kernel selection: compiled extension when available, pure Python otherwise.

Set BEPATH_PURE_PYTHON=1 to force the fallback (used by the benchmark and
by tests that compare the two implementations).
"""

import os

from . import _purepy

if os.environ.get("BEPATH_PURE_PYTHON"):
    _impl = _purepy
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        _impl = _purepy

IMPLEMENTATION = _impl.IMPLEMENTATION
fnv1a64 = _impl.fnv1a64
wordpiece_word = _impl.wordpiece_word
hashed_ngram_counts = _impl.hashed_ngram_counts

__all__ = ["IMPLEMENTATION", "fnv1a64", "wordpiece_word", "hashed_ngram_counts"]
