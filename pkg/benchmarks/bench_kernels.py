"""Benchmark the compiled text kernels against the pure-Python fallback.

Times the three hot paths (FNV-1a hashing, wordpiece segmentation,
hashed n-gram counting) over a synthetic corpus and reports throughput
for whichever implementations are importable.

Usage: python benchmarks/bench_kernels.py [--patients N] [--repeats R]
"""

from __future__ import annotations

import argparse
import time

from bepath._kernels import _purepy
from bepath.corpus import DEFAULT_CLASS_MIX, GeneratorSpec, generate_synthetic
from bepath.tokenization import demo_vocab_path, load_vocab

try:
    from bepath._kernels import _speedups
except ImportError:
    _speedups = None


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--patients", type=int, default=300)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)

    corpus = generate_synthetic(
        GeneratorSpec(n_patients=args.patients, class_mix=DEFAULT_CLASS_MIX, seed=99)
    )
    texts = [r.full_text.lower() for r in corpus.reports]
    words = [w for t in texts for w in t.split()]
    token_lists = [t.split() for t in texts]
    vocab = load_vocab(demo_vocab_path())
    n_tokens = sum(len(t) for t in token_lists)
    print(f"{len(texts)} reports, {n_tokens} tokens")

    impls = [("pure-python", _purepy)]
    if _speedups is not None:
        impls.append(("cython", _speedups))
    else:
        print("compiled extension not available; benchmarking fallback only")

    baselines: dict[str, float] = {}
    for name, mod in impls:
        hash_s = _time(lambda: [mod.fnv1a64(w.encode()) for w in words], args.repeats)
        wp_s = _time(
            lambda: [mod.wordpiece_word(w, vocab, "##", "[UNK]") for w in words], args.repeats
        )
        ngram_s = _time(
            lambda: [mod.hashed_ngram_counts(toks, 2 ** 18) for toks in token_lists],
            args.repeats,
        )
        for label, secs in (("fnv1a64", hash_s), ("wordpiece", wp_s), ("ngrams", ngram_s)):
            rate = n_tokens / secs / 1e6
            speedup = ""
            if name == "pure-python":
                baselines[label] = secs
            else:
                speedup = f"  ({baselines[label] / secs:.1f}x vs pure-python)"
            print(f"{name:12s} {label:10s} {secs * 1e3:8.1f} ms  {rate:6.2f} Mtok/s{speedup}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
