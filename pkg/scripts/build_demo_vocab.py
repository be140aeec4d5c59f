"""Rebuild the bundled demonstration vocabulary.

The vocabulary covers the synthetic corpus well enough that wordpiece
tokenization rarely falls back to single characters: special markers,
every printable ASCII character (as initial and continuation pieces),
common English suffixes, and every word that appears at least twice in
a fixed-seed synthetic corpus. Output is deterministic, so the
checked-in file can be regenerated and diffed.

Usage: python scripts/build_demo_vocab.py [--out PATH]
"""

from __future__ import annotations

import argparse
import collections
import string
from pathlib import Path

from bepath.corpus import DEFAULT_CLASS_MIX, GeneratorSpec, generate_synthetic

SPECIALS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]")
SUFFIXES = ("##s", "##ed", "##ing", "##ia", "##ic", "##al", "##osis", "##tion")


def build_vocab() -> list[str]:
    corpus = generate_synthetic(
        GeneratorSpec(n_patients=200, class_mix=DEFAULT_CLASS_MIX, seed=1234)
    )
    counts: collections.Counter[str] = collections.Counter()
    for report in corpus.reports:
        counts.update(report.full_text.lower().split())

    vocab: list[str] = list(SPECIALS)
    chars = string.ascii_lowercase + string.digits + string.punctuation
    vocab.extend(chars)
    vocab.extend("##" + c for c in chars)
    vocab.extend(SUFFIXES)
    seen = set(vocab)
    # Frequent first, then alphabetical, so the file is stable and the
    # common clinical terms sit near the top.
    for word, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
        if count >= 2 and word not in seen:
            vocab.append(word)
            seen.add(word)
    return vocab


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    default_out = Path(__file__).resolve().parent.parent / "src/bepath/data/demo_vocab.txt"
    parser.add_argument("--out", default=str(default_out), help="output vocabulary path")
    args = parser.parse_args(argv)
    vocab = build_vocab()
    Path(args.out).write_text("\n".join(vocab) + "\n", encoding="utf-8")
    print(f"wrote {len(vocab)} tokens to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
