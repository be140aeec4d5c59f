"""Report cleaning and diagnosis sub-section extraction.

Cleaning removes extraction artifacts (repeated punctuation, ragged
whitespace) and is idempotent. Sub-sectioning keeps only the blocks that
start at a recognized diagnosis heading and stops at the first terminator
heading (signatures, comments, gross description, ...), so headers,
clinical history, and signatures never reach the models. Heading names are
configurable because they differ across institutions.
"""

from __future__ import annotations

import dataclasses
import re
import string
from dataclasses import dataclass

from .corpus import Corpus

DEFAULT_DIAGNOSIS_HEADINGS = (
    "FINAL DIAGNOSIS",
    "DIAGNOSIS",
    "PATHOLOGIC DIAGNOSIS",
)

DEFAULT_TERMINATOR_HEADINGS = (
    "COMMENT",
    "SIGNATURE",
    "ELECTRONICALLY SIGNED",
    "GROSS DESCRIPTION",
    "CLINICAL HISTORY",
)


class NoDiagnosisSection(ValueError):
    """No diagnosis heading found in the report text."""

    def __init__(self, report_id: str | None = None):
        self.report_id = report_id
        super().__init__(
            "no diagnosis heading found" + (f" in report {report_id!r}" if report_id else "")
        )


@dataclass(frozen=True)
class HeadingLexicon:
    """Case-insensitive heading patterns, matched literally at line starts."""

    diagnosis_headings: tuple[str, ...] = DEFAULT_DIAGNOSIS_HEADINGS
    terminator_headings: tuple[str, ...] = DEFAULT_TERMINATOR_HEADINGS

    def __post_init__(self):
        if not self.diagnosis_headings:
            raise ValueError("diagnosis_headings must be non-empty")


DEFAULT_LEXICON = HeadingLexicon()

_PUNCT_RUN = re.compile("([" + re.escape(string.punctuation) + r"])\1{2,}")
_SPACE_RUN = re.compile(r"[ \t]+")
_TRAILING = re.compile(r" +$", re.MULTILINE)


def clean_text(raw: str) -> str:
    """Normalize a raw report: line endings to \\n, runs of three or more
    identical punctuation characters to one, runs of spaces/tabs to a
    single space, and no trailing whitespace on any line. Idempotent and
    never longer than its input.
    """
    text = raw.replace("\r\n", "\n").replace("\r", "\n")
    text = _PUNCT_RUN.sub(r"\1", text)
    text = _SPACE_RUN.sub(" ", text)
    text = _TRAILING.sub("", text)
    return text


def _match_heading(line: str, patterns: tuple[str, ...]) -> str | None:
    """Return the longest pattern matching at the start of the line.

    A pattern matches when the line begins with it (case-insensitive,
    leading whitespace ignored) followed by end-of-line, a colon, or any
    non-alphanumeric character.
    """
    candidate = line.lstrip().lower()
    best = None
    for pattern in patterns:
        p = pattern.lower()
        if not candidate.startswith(p):
            continue
        rest = candidate[len(p):]
        if rest and rest[0].isalnum():
            continue
        if best is None or len(pattern) > len(best):
            best = pattern
    return best


def extract_subsection(full_text: str, lexicon: HeadingLexicon = DEFAULT_LEXICON) -> str:
    """Concatenate the diagnosis blocks of an already-cleaned report.

    A block runs from a diagnosis heading line (inclusive) to the next
    terminator heading, the next diagnosis heading, or end of text. Blocks
    are joined with a single newline; trailing blank lines inside a block
    are dropped. Raises NoDiagnosisSection when no heading is present.
    """
    blocks: list[list[str]] = []
    current: list[str] | None = None
    for line in full_text.split("\n"):
        if _match_heading(line, lexicon.diagnosis_headings) is not None:
            current = [line]
            blocks.append(current)
        elif current is not None and _match_heading(line, lexicon.terminator_headings) is not None:
            current = None
        elif current is not None:
            current.append(line)
    if not blocks:
        raise NoDiagnosisSection()
    parts = []
    for block in blocks:
        while block and not block[-1].strip():
            block.pop()
        parts.append("\n".join(block))
    return "\n".join(parts)


def preprocess_corpus(
    corpus: Corpus,
    mode: str,
    lexicon: HeadingLexicon = DEFAULT_LEXICON,
) -> tuple[Corpus, list[str]]:
    """Clean every report; in subsection mode also extract the diagnosis text.

    Reports without a recognizable diagnosis heading stay in the corpus
    with no sub-section text and their ids are returned as rejects; they
    can still be used for full-report experiments.
    """
    if mode not in ("full", "subsection"):
        raise ValueError(f"unknown preprocess mode {mode!r}")
    out = []
    rejects: list[str] = []
    for report in corpus.reports:
        cleaned = clean_text(report.full_text)
        sub = report.sub_section_text
        if mode == "subsection":
            try:
                sub = extract_subsection(cleaned, lexicon)
            except NoDiagnosisSection:
                sub = None
                rejects.append(report.report_id)
        out.append(dataclasses.replace(report, full_text=cleaned, sub_section_text=sub))
    return Corpus(reports=out, provenance=corpus.provenance), rejects
