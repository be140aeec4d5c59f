"""Report data model, JSONL ingestion, and the synthetic corpus generator.

The generator stands in for the original PHI dataset: it emits pathology
reports with a realistic block structure (header, clinical history,
specimen, diagnosis section under a recognizable heading, signature) and a
known gold label, so every downstream stage can be exercised end to end.
Each class is tied to an affirmative phrase bank; benign reports may carry
syntactically negated mentions of severe-class phrases so that naive
keyword matching is not enough.
"""

from __future__ import annotations

import dataclasses
import datetime
import json
import random
from dataclasses import dataclass, field

from .labels import DiagnosisLabel

JSONL_FIELDS = (
    "report_id",
    "patient_id",
    "collected_date",
    "full_text",
    "sub_section_text",
    "gold_label",
)


class MalformedRecord(ValueError):
    """A JSONL line that cannot be parsed into a report."""

    def __init__(self, line_number: int, detail: str):
        self.line_number = line_number
        self.detail = detail
        super().__init__(f"line {line_number}: {detail}")


class DuplicateReportId(ValueError):
    def __init__(self, report_id: str):
        self.report_id = report_id
        super().__init__(f"duplicate report_id {report_id!r}")


class InvalidSpec(ValueError):
    """Generator spec with a malformed class mix or distribution."""


@dataclass(frozen=True)
class PathologyReport:
    report_id: str
    patient_id: str
    collected_date: datetime.date
    full_text: str
    sub_section_text: str | None = None
    gold_label: DiagnosisLabel | None = None


@dataclass
class Corpus:
    reports: list[PathologyReport]
    # Metadata, not identity: a reloaded synthetic corpus is still the
    # same corpus.
    provenance: str = field(default="ingested", compare=False)

    def __iter__(self):
        return iter(self.reports)

    def __len__(self) -> int:
        return len(self.reports)

    def patient_ids(self) -> list[str]:
        """Unique patient ids in first-appearance order."""
        seen: dict[str, None] = {}
        for report in self.reports:
            seen.setdefault(report.patient_id, None)
        return list(seen)

    def by_id(self) -> dict[str, PathologyReport]:
        return {r.report_id: r for r in self.reports}


# --------------------------------------------------------------------------
# JSONL serialization
# --------------------------------------------------------------------------

def _report_to_record(report: PathologyReport) -> dict:
    return {
        "report_id": report.report_id,
        "patient_id": report.patient_id,
        "collected_date": report.collected_date.isoformat(),
        "full_text": report.full_text,
        "sub_section_text": report.sub_section_text,
        "gold_label": report.gold_label.key if report.gold_label is not None else None,
    }


def _record_to_report(record: dict, line_number: int) -> PathologyReport:
    for name in ("report_id", "patient_id", "collected_date", "full_text"):
        if name not in record:
            raise MalformedRecord(line_number, f"missing field {name!r}")
    try:
        collected = datetime.date.fromisoformat(record["collected_date"])
    except (TypeError, ValueError):
        raise MalformedRecord(
            line_number, f"bad collected_date {record['collected_date']!r}"
        ) from None
    raw_label = record.get("gold_label")
    if raw_label is None:
        label = None
    else:
        try:
            label = DiagnosisLabel.from_key(raw_label)
        except Exception:
            raise MalformedRecord(line_number, f"unknown gold_label {raw_label!r}") from None
    if not isinstance(record["full_text"], str) or not record["full_text"]:
        raise MalformedRecord(line_number, "full_text must be a non-empty string")
    return PathologyReport(
        report_id=str(record["report_id"]),
        patient_id=str(record["patient_id"]),
        collected_date=collected,
        full_text=record["full_text"],
        sub_section_text=record.get("sub_section_text"),
        gold_label=label,
    )


def load_corpus(path, format: str = "jsonl") -> Corpus:
    """Load a corpus from a newline-delimited JSON file.

    Unknown fields on each record are ignored. Raises MalformedRecord with
    the offending line number, or DuplicateReportId.
    """
    if format != "jsonl":
        raise ValueError(f"unsupported corpus format {format!r}")
    reports: list[PathologyReport] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_number, f"invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise MalformedRecord(line_number, "record is not a JSON object")
            report = _record_to_report(record, line_number)
            if report.report_id in seen:
                raise DuplicateReportId(report.report_id)
            seen.add(report.report_id)
            reports.append(report)
    return Corpus(reports=reports, provenance="ingested")


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for report in corpus.reports:
            fh.write(json.dumps(_report_to_record(report), ensure_ascii=False))
            fh.write("\n")


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    report_id: str
    kind: str
    detail: str


@dataclass
class ValidationReport:
    violations: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> str:
        return json.dumps(
            {"ok": self.ok, "violations": [dataclasses.asdict(v) for v in self.violations]},
            indent=2,
        )


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """List data-quality violations; an empty list means the corpus is valid."""
    violations: list[Violation] = []
    seen: set[str] = set()
    for report in corpus.reports:
        if not report.report_id:
            violations.append(Violation(report.report_id, "empty_report_id", "report has no id"))
        if report.report_id in seen:
            violations.append(
                Violation(report.report_id, "duplicate_report_id", "report_id appears twice")
            )
        seen.add(report.report_id)
        if not report.full_text:
            violations.append(Violation(report.report_id, "empty_full_text", "full_text is empty"))
        if report.sub_section_text is not None and not report.sub_section_text:
            violations.append(
                Violation(report.report_id, "empty_sub_section", "sub_section_text is empty")
            )
        if report.gold_label is not None and not isinstance(report.gold_label, DiagnosisLabel):
            violations.append(
                Violation(report.report_id, "invalid_label", f"label {report.gold_label!r}")
            )
    return ValidationReport(violations)


# --------------------------------------------------------------------------
# Synthetic generator
# --------------------------------------------------------------------------

#: Affirmative phrase bank per class. Every synthetic report's diagnosis
#: section contains at least one phrase from its own bank, and phrases
#: from other banks appear only in negated form.
PHRASE_BANKS: dict[DiagnosisLabel, tuple[str, ...]] = {
    DiagnosisLabel.EAC: ("invasive adenocarcinoma",),
    DiagnosisLabel.BE_HGD: ("high-grade dysplasia",),
    DiagnosisLabel.BE_LGD: ("low-grade dysplasia",),
    DiagnosisLabel.BE_INDEFINITE: ("indefinite for dysplasia",),
    DiagnosisLabel.BE_NO_DYSPLASIA: ("intestinal metaplasia", "negative for dysplasia"),
    DiagnosisLabel.NO_BE: ("squamous mucosa", "no intestinal metaplasia"),
}

#: Immediate prefixes that make a phrase occurrence count as negated.
NEGATION_CUES = ("no ", "negative for ", "without ")

_DIAGNOSIS_SENTENCES: dict[DiagnosisLabel, tuple[str, ...]] = {
    DiagnosisLabel.EAC: (
        "Invasive adenocarcinoma, moderately differentiated, arising in Barrett's mucosa.",
        "Invasive adenocarcinoma, at least intramucosal, involving esophageal biopsy fragments.",
        "Fragments of invasive adenocarcinoma with desmoplastic stromal response.",
    ),
    DiagnosisLabel.BE_HGD: (
        "Barrett's esophagus with high-grade dysplasia.",
        "Columnar-lined esophageal mucosa with high-grade dysplasia, multifocal.",
        "Barrett's mucosa showing high-grade dysplasia; margins cannot be assessed.",
    ),
    DiagnosisLabel.BE_LGD: (
        "Barrett's esophagus with low-grade dysplasia.",
        "Barrett's mucosa with focal low-grade dysplasia.",
        "Columnar-lined mucosa showing low-grade dysplasia, confirmed on review.",
    ),
    DiagnosisLabel.BE_INDEFINITE: (
        "Barrett's esophagus, indefinite for dysplasia.",
        "Barrett's mucosa with reactive changes, indefinite for dysplasia.",
        "Columnar-lined mucosa indefinite for dysplasia; recut levels examined.",
    ),
    DiagnosisLabel.BE_NO_DYSPLASIA: (
        "Barrett's esophagus with intestinal metaplasia, negative for dysplasia.",
        "Columnar mucosa with intestinal metaplasia; negative for dysplasia.",
        "Goblet cells consistent with intestinal metaplasia, negative for dysplasia.",
    ),
    DiagnosisLabel.NO_BE: (
        "Squamous mucosa, unremarkable; no intestinal metaplasia identified.",
        "Gastroesophageal junctional mucosa with no intestinal metaplasia.",
        "Benign squamous mucosa with mild reactive change; no intestinal metaplasia seen.",
    ),
}

#: Negated mentions of severe-class phrases, injected into benign reports.
DISTRACTOR_SENTENCES = (
    "No invasive adenocarcinoma identified.",
    "Negative for high-grade dysplasia.",
    "Negative for low-grade dysplasia.",
)

#: Labels eligible for a distractor (the binary-negative classes).
_BENIGN_LABELS = (
    DiagnosisLabel.BE_INDEFINITE,
    DiagnosisLabel.BE_NO_DYSPLASIA,
    DiagnosisLabel.NO_BE,
)

_FILLER_SENTENCES = (
    "See comment.",
    "Recut levels examined.",
    "Correlation with endoscopic findings is recommended.",
    "Special stains were reviewed.",
)

_FIRST_NAMES = (
    "JAMES", "MARY", "ROBERT", "PATRICIA", "JOHN", "LINDA", "MICHAEL",
    "BARBARA", "DAVID", "ELIZABETH", "WILLIAM", "JENNIFER", "RICHARD",
    "MARIA", "CHARLES", "SUSAN", "JOSEPH", "MARGARET", "THOMAS", "DOROTHY",
)

_LAST_NAMES = (
    "SMITH", "JOHNSON", "WILLIAMS", "BROWN", "JONES", "GARCIA", "MILLER",
    "DAVIS", "RODRIGUEZ", "MARTINEZ", "HERNANDEZ", "LOPEZ", "GONZALEZ",
    "WILSON", "ANDERSON", "THOMAS", "TAYLOR", "MOORE", "JACKSON", "MARTIN",
)

_PATHOLOGISTS = (
    "A. OKAFOR, MD", "R. BLUM, MD", "S. NAKAMURA, MD", "L. FERRARO, MD",
    "C. DUBOIS, MD", "H. LINDGREN, MD",
)

_HISTORY_LINES = (
    "Barrett's esophagus surveillance.",
    "Surveillance endoscopy for known Barrett's esophagus.",
    "GERD; evaluate for Barrett's esophagus.",
    "Follow-up of irregular z-line seen on prior endoscopy.",
)

_SPECIMEN_SITES = (
    "ESOPHAGUS, DISTAL, 38 CM, BIOPSY",
    "ESOPHAGUS, DISTAL, 36 CM, BIOPSY",
    "ESOPHAGUS, MID, 30 CM, BIOPSY",
    "GASTROESOPHAGEAL JUNCTION, BIOPSY",
)

_DIAGNOSIS_HEADINGS = ("FINAL DIAGNOSIS", "DIAGNOSIS", "PATHOLOGIC DIAGNOSIS")

#: Truncated geometric over 1..8 with p=0.3: median 2, IQR 1-4.
DEFAULT_REPORTS_PER_PATIENT = tuple(
    0.3 * 0.7 ** (k - 1) / (1.0 - 0.7 ** 8) for k in range(1, 9)
)

#: Label proportions of a BE surveillance workload: benign findings
#: dominate, cancers are rare. Order follows DiagnosisLabel.
DEFAULT_CLASS_MIX = (11 / 301, 30 / 301, 18 / 301, 15 / 301, 88 / 301, 139 / 301)


@dataclass(frozen=True)
class GeneratorSpec:
    n_patients: int
    class_mix: tuple[float, ...]
    reports_per_patient: tuple[float, ...] = DEFAULT_REPORTS_PER_PATIENT
    negation_distractor_rate: float = 0.3
    seed: int = 0

    def validate(self) -> None:
        if self.n_patients < 1:
            raise InvalidSpec("n_patients must be positive")
        if len(self.class_mix) != len(DiagnosisLabel):
            raise InvalidSpec(f"class_mix needs {len(DiagnosisLabel)} entries")
        if any(p < 0 for p in self.class_mix):
            raise InvalidSpec("class_mix entries must be non-negative")
        if abs(sum(self.class_mix) - 1.0) > 1e-9:
            raise InvalidSpec("class_mix must sum to 1")
        if not self.reports_per_patient or any(p < 0 for p in self.reports_per_patient):
            raise InvalidSpec("reports_per_patient must be a non-negative distribution")
        if abs(sum(self.reports_per_patient) - 1.0) > 1e-9:
            raise InvalidSpec("reports_per_patient must sum to 1")
        if not 0.0 <= self.negation_distractor_rate <= 1.0:
            raise InvalidSpec("negation_distractor_rate must be in [0, 1]")


def _draw(rng: random.Random, probs: tuple[float, ...]) -> int:
    x = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if x < acc:
            return i
    return len(probs) - 1


def _diagnosis_block(rng: random.Random, label: DiagnosisLabel, distractor_rate: float) -> str:
    heading = rng.choice(_DIAGNOSIS_HEADINGS)
    lines = [f"{heading}:"]
    n_parts = rng.choice((1, 1, 2))
    for part in range(n_parts):
        prefix = chr(ord("A") + part)
        lines.append(f"{prefix}. {rng.choice(_SPECIMEN_SITES)}:")
        lines.append(f"- {rng.choice(_DIAGNOSIS_SENTENCES[label])}")
        if label in _BENIGN_LABELS and rng.random() < distractor_rate:
            lines.append(f"- {rng.choice(DISTRACTOR_SENTENCES)}")
        if rng.random() < 0.4:
            lines.append(f"- {rng.choice(_FILLER_SENTENCES)}")
    return "\n".join(lines)


def _report_text(rng: random.Random, patient_name: str, mrn: str,
                 collected: datetime.date, label: DiagnosisLabel,
                 distractor_rate: float) -> str:
    accession = f"S{collected.year % 100:02d}-{rng.randrange(100000):06d}"
    noise = ":" * rng.choice((0, 0, 0, 3, 4))  # extraction artifact
    blocks = [
        "\n".join(
            [
                f"ACCESSION NO{noise or ':'} {accession}",
                f"PATIENT: {patient_name}",
                f"MRN: {mrn}",
                f"COLLECTED: {collected.isoformat()}",
            ]
        ),
        f"CLINICAL HISTORY:\n{rng.choice(_HISTORY_LINES)}",
        f"SPECIMEN(S) RECEIVED:\nA. {rng.choice(_SPECIMEN_SITES)}",
    ]
    if rng.random() < 0.5:
        blocks.append(
            "GROSS DESCRIPTION:\nReceived in formalin, multiple tan-pink tissue "
            "fragments measuring up to 0.4 cm, entirely submitted."
        )
    blocks.append(_diagnosis_block(rng, label, distractor_rate))
    if rng.random() < 0.3:
        blocks.append("COMMENT:\nFindings were reviewed at intradepartmental conference.")
    blocks.append(f"ELECTRONICALLY SIGNED BY {rng.choice(_PATHOLOGISTS)}")
    sep = "\n" + "=" * rng.choice((0, 0, 5)) + "\n" if rng.random() < 0.3 else "\n\n"
    return sep.join(blocks)


def generate_synthetic(spec: GeneratorSpec) -> Corpus:
    """Generate a labeled corpus; a pure function of the spec.

    Equal specs produce byte-identical corpora: all randomness flows from a
    single seeded stream, and patients/reports are emitted in a fixed order.
    """
    spec.validate()
    rng = random.Random(spec.seed)
    reports: list[PathologyReport] = []
    width = max(4, len(str(spec.n_patients)))
    for p_index in range(spec.n_patients):
        patient_id = f"pt{p_index + 1:0{width}d}"
        patient_name = f"{rng.choice(_LAST_NAMES)}, {rng.choice(_FIRST_NAMES)}"
        mrn = f"{rng.randrange(1_000_000, 10_000_000)}"
        n_reports = _draw(rng, spec.reports_per_patient) + 1
        base = datetime.date(2016, 1, 1)
        offsets = sorted(rng.randrange(0, 5 * 365) for _ in range(n_reports))
        for r_index in range(n_reports):
            label = DiagnosisLabel(_draw(rng, spec.class_mix))
            collected = base + datetime.timedelta(days=offsets[r_index])
            text = _report_text(
                rng, patient_name, mrn, collected, label, spec.negation_distractor_rate
            )
            reports.append(
                PathologyReport(
                    report_id=f"{patient_id}-r{r_index + 1}",
                    patient_id=patient_id,
                    collected_date=collected,
                    full_text=text,
                    gold_label=label,
                )
            )
    return Corpus(reports=reports, provenance="synthetic")


def affirmative_occurrences(text: str, phrase: str) -> int:
    """Count occurrences of phrase not immediately preceded by a negation cue.

    Case-insensitive; used to check that a report only carries other
    classes' phrases in negated form.
    """
    lowered = text.lower()
    needle = phrase.lower()
    count = 0
    start = 0
    while True:
        pos = lowered.find(needle, start)
        if pos < 0:
            return count
        head = lowered[:pos]
        if not any(head.endswith(cue) for cue in NEGATION_CUES):
            count += 1
        start = pos + 1
