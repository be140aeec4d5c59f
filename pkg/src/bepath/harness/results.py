"""Result-table emission and external comparator constants.

The rule-based comparator itself is not implemented here; only its
published numbers ship as reference constants so emitted tables can
carry the comparison row. Reference rows are marked as external in both
the CSV (model name suffix) and the JSON (source field), and never carry
AU-ROC or F2-Beta values because the comparator study reported neither.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

from ..metrics import MetricsReport

REPORT_TYPE_DISPLAY = {"subsection": "Sub-Sectioned", "full": "Full"}
MODEL_DISPLAY = {
    "clinical_bert": "ClinicalBERT",
    "clinical_bigbird": "Clinical-BigBird",
    "baseline_linear": "Baseline-Linear",
}

BASE_COLUMNS = ("Report Type", "Model", "Recall", "Precision", "Accuracy", "F1-Score", "AU-ROC")


@dataclass(frozen=True)
class ResultRow:
    """One model row: where the text came from and how the model scored."""

    report_type: str  # full | subsection
    model: str
    metrics: MetricsReport
    dataset: str | None = None  # validation | development


@dataclass(frozen=True)
class ReferenceRow:
    """Published comparator numbers, copied verbatim; not computed here."""

    report_type: str
    model: str
    recall: float
    precision: float
    accuracy: float
    f1: float
    dataset: str | None = None


RULE_BASED_REFERENCE = {
    ("binary", "validation"): ReferenceRow("subsection", "Rule-Based", 1.000, 0.966, 0.990, 0.982),
    ("binary", "development"): ReferenceRow(
        "subsection", "Rule-Based", 1.000, 0.938, 0.989, 0.968, dataset="development"
    ),
    ("multiclass", "validation"): ReferenceRow(
        "subsection", "Rule-Based", 0.973, 0.946, 0.975, 0.958
    ),
    ("multiclass", "development"): ReferenceRow(
        "subsection", "Rule-Based", 0.970, 0.977, 0.989, 0.971, dataset="development"
    ),
}


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.3f}"


def emit_results(
    rows: list[ResultRow], comparator: list[ReferenceRow] | None = None
) -> tuple[str, list[dict]]:
    """Render result rows as (csv_text, json_rows).

    Column layout follows the published tables: the F2-Beta column is
    appended only when a full-report model row is present, and only full
    rows carry a value in it. A Dataset column appears when any row is
    tagged with one.
    """
    comparator = list(comparator or [])
    with_f2 = any(row.report_type == "full" for row in rows)
    with_dataset = any(row.dataset for row in rows) or any(row.dataset for row in comparator)

    header = list(BASE_COLUMNS)
    if with_dataset:
        header.insert(2, "Dataset")
    if with_f2:
        header.append("F2-Beta")

    csv_rows: list[list[str]] = []
    json_rows: list[dict] = []
    for row in rows:
        metrics = row.metrics
        record = {
            "report_type": row.report_type,
            "model": row.model,
            "recall": round(metrics.recall, 3),
            "precision": round(metrics.precision, 3),
            "accuracy": round(metrics.accuracy, 3),
            "f1": round(metrics.f1, 3),
            "auroc": round(metrics.auroc, 3) if metrics.auroc is not None else None,
            "source": "this_run",
        }
        cells = [
            REPORT_TYPE_DISPLAY.get(row.report_type, row.report_type),
            MODEL_DISPLAY.get(row.model, row.model),
            _fmt(metrics.recall),
            _fmt(metrics.precision),
            _fmt(metrics.accuracy),
            _fmt(metrics.f1),
            _fmt(metrics.auroc),
        ]
        if with_dataset:
            cells.insert(2, row.dataset or "-")
            record["dataset"] = row.dataset
        if with_f2:
            show_f2 = row.report_type == "full"
            cells.append(_fmt(metrics.f2_beta) if show_f2 else "-")
            record["f2_beta"] = round(metrics.f2_beta, 3) if show_f2 else None
        csv_rows.append(cells)
        json_rows.append(record)

    for ref in comparator:
        record = {
            "report_type": ref.report_type,
            "model": ref.model,
            "recall": ref.recall,
            "precision": ref.precision,
            "accuracy": ref.accuracy,
            "f1": ref.f1,
            "auroc": None,
            "source": "external_reference",
        }
        cells = [
            REPORT_TYPE_DISPLAY.get(ref.report_type, ref.report_type),
            f"{ref.model} (reference)",
            _fmt(ref.recall),
            _fmt(ref.precision),
            _fmt(ref.accuracy),
            _fmt(ref.f1),
            "-",
        ]
        if with_dataset:
            cells.insert(2, ref.dataset or "-")
            record["dataset"] = ref.dataset
        if with_f2:
            cells.append("-")
            record["f2_beta"] = None
        csv_rows.append(cells)
        json_rows.append(record)

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(csv_rows)
    return buffer.getvalue(), json_rows


def results_table_json(json_rows: list[dict]) -> str:
    return json.dumps(json_rows, indent=2, sort_keys=True)
