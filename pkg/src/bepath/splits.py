"""Patient-level and report-level partitioning.

The dataset is first split into development/validation at the patient
level (all of a patient's reports land on one side), then the development
reports are split into train/evaluation at the report level. Both splits
are seeded shuffles of sorted ids followed by a prefix take, so they are
reproducible across platforms and independent of corpus iteration order.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass

from .corpus import Corpus
from .labels import DiagnosisLabel


class TooFewPatients(ValueError):
    pass


class TooFewReports(ValueError):
    pass


class SplitLeakage(AssertionError):
    """A patient or report appears on both sides of a partition."""


@dataclass(frozen=True)
class CorpusSplit:
    dev_patient_ids: frozenset[str]
    val_patient_ids: frozenset[str]
    train_report_ids: frozenset[str]
    eval_report_ids: frozenset[str]
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "dev_patient_ids": sorted(self.dev_patient_ids),
                "val_patient_ids": sorted(self.val_patient_ids),
                "train_report_ids": sorted(self.train_report_ids),
                "eval_report_ids": sorted(self.eval_report_ids),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "CorpusSplit":
        data = json.loads(text)
        return cls(
            dev_patient_ids=frozenset(data["dev_patient_ids"]),
            val_patient_ids=frozenset(data["val_patient_ids"]),
            train_report_ids=frozenset(data["train_report_ids"]),
            eval_report_ids=frozenset(data["eval_report_ids"]),
            seed=int(data["seed"]),
        )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _shuffled(ids, seed: int) -> list[str]:
    ordered = sorted(ids)
    random.Random(seed).shuffle(ordered)
    return ordered


def split_patients(
    corpus: Corpus, val_fraction: float, seed: int
) -> tuple[frozenset[str], frozenset[str]]:
    """Partition patient ids into (development, validation).

    |validation| = round(val_fraction * n_patients), rounding half up.
    """
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must be in (0, 1)")
    patients = corpus.patient_ids()
    if len(patients) < 2:
        raise TooFewPatients(f"need at least 2 patients, have {len(patients)}")
    shuffled = _shuffled(patients, seed)
    n_val = _round_half_up(val_fraction * len(patients))
    return frozenset(shuffled[n_val:]), frozenset(shuffled[:n_val])


def _most_severe_label(reports) -> int:
    labels = [r.gold_label for r in reports if r.gold_label is not None]
    return min(labels) if labels else len(DiagnosisLabel)


def split_patients_stratified(
    corpus: Corpus, val_fraction: float, seed: int
) -> tuple[frozenset[str], frozenset[str]]:
    """Patient split stratified by each patient's most severe report label.

    Off by default in the pipeline; the published split was not described
    as stratified.
    """
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must be in (0, 1)")
    patients = corpus.patient_ids()
    if len(patients) < 2:
        raise TooFewPatients(f"need at least 2 patients, have {len(patients)}")
    by_patient: dict[str, list] = {pid: [] for pid in patients}
    for report in corpus.reports:
        by_patient[report.patient_id].append(report)
    strata: dict[int, list[str]] = {}
    for pid in sorted(patients):
        strata.setdefault(_most_severe_label(by_patient[pid]), []).append(pid)
    rng = random.Random(seed)
    val: list[str] = []
    for stratum in sorted(strata):
        ids = strata[stratum]
        rng.shuffle(ids)
        val.extend(ids[: _round_half_up(val_fraction * len(ids))])
    val_set = frozenset(val)
    return frozenset(patients) - val_set, val_set


def split_reports(
    dev: Corpus, eval_fraction: float, seed: int
) -> tuple[frozenset[str], frozenset[str]]:
    """Partition report ids into (train, evaluation) at the report level.

    A patient's reports may straddle the two sides; only the dev/val split
    is patient-disjoint.
    """
    if not 0.0 < eval_fraction < 1.0:
        raise ValueError("eval_fraction must be in (0, 1)")
    ids = [r.report_id for r in dev.reports]
    if len(ids) < 2:
        raise TooFewReports(f"need at least 2 reports, have {len(ids)}")
    shuffled = _shuffled(ids, seed)
    n_eval = _round_half_up(eval_fraction * len(ids))
    return frozenset(shuffled[n_eval:]), frozenset(shuffled[:n_eval])


def make_split(
    corpus: Corpus,
    val_fraction: float,
    eval_fraction: float,
    seed: int,
    stratify: bool = False,
) -> CorpusSplit:
    """Compose the patient-level and report-level splits into one record."""
    splitter = split_patients_stratified if stratify else split_patients
    dev_patients, val_patients = splitter(corpus, val_fraction, seed)
    dev_reports = [r for r in corpus.reports if r.patient_id in dev_patients]
    train_ids, eval_ids = split_reports(
        Corpus(dev_reports, provenance=corpus.provenance), eval_fraction, seed
    )
    return CorpusSplit(
        dev_patient_ids=dev_patients,
        val_patient_ids=val_patients,
        train_report_ids=train_ids,
        eval_report_ids=eval_ids,
        seed=seed,
    )


def check_no_leakage(split: CorpusSplit, corpus: Corpus) -> None:
    """Raise SplitLeakage unless the split is a clean two-level partition."""
    if split.dev_patient_ids & split.val_patient_ids:
        raise SplitLeakage("patient ids appear in both dev and val")
    all_patients = set(corpus.patient_ids())
    if split.dev_patient_ids | split.val_patient_ids != all_patients:
        raise SplitLeakage("dev and val do not cover all patients")
    if split.train_report_ids & split.eval_report_ids:
        raise SplitLeakage("report ids appear in both train and eval")
    dev_report_ids = {
        r.report_id for r in corpus.reports if r.patient_id in split.dev_patient_ids
    }
    if split.train_report_ids | split.eval_report_ids != dev_report_ids:
        raise SplitLeakage("train and eval do not cover the development reports")
    for rid in split.train_report_ids | split.eval_report_ids:
        if rid not in dev_report_ids:
            raise SplitLeakage(f"report {rid!r} belongs to a validation patient")
