"""Diagnosis taxonomy for Barrett's esophagus pathology reports.

Six diagnosis classes ordered most-to-least severe, plus the binary
dysplasia collapse (dysplasia-or-worse vs no-dysplasia). The class index
order is fixed: it defines confusion-matrix axes everywhere downstream.
"""

from __future__ import annotations

import csv
import io
from enum import IntEnum


class DiagnosisLabel(IntEnum):
    """Six-class BE diagnosis, index order most to least severe."""

    EAC = 0
    BE_HGD = 1
    BE_LGD = 2
    BE_INDEFINITE = 3
    BE_NO_DYSPLASIA = 4
    NO_BE = 5

    @property
    def key(self) -> str:
        """Canonical lowercase string key used in files and configs."""
        return self.name.lower()

    @classmethod
    def from_key(cls, key: str) -> "DiagnosisLabel":
        try:
            return cls[key.upper()]
        except KeyError:
            raise UnknownLabel(key) from None


class BinaryLabel(IntEnum):
    """Binary dysplasia target; 1 is the positive class."""

    NO_DYSPLASIA = 0
    DYSPLASIA_OR_WORSE = 1


#: Human-readable names, in canonical index order.
LABEL_DISPLAY_NAMES = {
    DiagnosisLabel.EAC: "EAC",
    DiagnosisLabel.BE_HGD: "BE with HGD",
    DiagnosisLabel.BE_LGD: "BE with LGD",
    DiagnosisLabel.BE_INDEFINITE: "BE indefinite for dysplasia",
    DiagnosisLabel.BE_NO_DYSPLASIA: "BE with no dysplasia",
    DiagnosisLabel.NO_BE: "No histological evidence of BE",
}


class UnknownLabel(ValueError):
    """A string key that names no diagnosis class."""


class UnlabeledReport(ValueError):
    """A report without a gold label where one is required."""

    def __init__(self, report_id: str):
        self.report_id = report_id
        super().__init__(f"report {report_id!r} has no gold label")


def to_binary(label: DiagnosisLabel) -> BinaryLabel:
    """Collapse a diagnosis to the binary dysplasia target.

    EAC, BE with HGD, and BE with LGD are dysplasia-or-worse; the three
    remaining classes are no-dysplasia.
    """
    if label <= DiagnosisLabel.BE_LGD:
        return BinaryLabel.DYSPLASIA_OR_WORSE
    return BinaryLabel.NO_DYSPLASIA


def class_distribution(corpus) -> list[tuple[DiagnosisLabel, int, float]]:
    """Per-class (label, count, percent) rows over a fully labeled corpus.

    Percent is 100 * count / total, unrounded; rounding to one decimal
    happens at emission. Raises UnlabeledReport on the first unlabeled
    report encountered.
    """
    counts = {label: 0 for label in DiagnosisLabel}
    total = 0
    for report in corpus.reports:
        if report.gold_label is None:
            raise UnlabeledReport(report.report_id)
        counts[report.gold_label] += 1
        total += 1
    return [
        (label, counts[label], 100.0 * counts[label] / total if total else 0.0)
        for label in DiagnosisLabel
    ]


def binarize_corpus(corpus) -> list[tuple[str, BinaryLabel]]:
    """Map every report to (report_id, binary label), preserving order."""
    out = []
    for report in corpus.reports:
        if report.gold_label is None:
            raise UnlabeledReport(report.report_id)
        out.append((report.report_id, to_binary(report.gold_label)))
    return out


def distribution_csv(rows: list[tuple[DiagnosisLabel, int, float]]) -> str:
    """Render class_distribution rows as CSV (label,count,percent)."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["label", "count", "percent"])
    for label, count, percent in rows:
        writer.writerow([label.key, count, f"{percent:.1f}"])
    return buf.getvalue()
