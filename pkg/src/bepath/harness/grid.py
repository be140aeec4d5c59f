"""Grid search over trial configs, best-model selection, final evaluation.

The runner is leakage-proof by construction: run_grid receives the
development split only (train and evaluation report ids), so validation
reports are unreachable from inside the sweep. Validation text is read
exactly once, by evaluate_validation, after the best trial is fixed.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .backends import BackendUnavailable, ClassifierBackend, LabeledExample, TrainingFailure
from .config import OPTIMIZATION_METRICS, PredictionSet, TrialConfig, TrialResult
from ..corpus import Corpus
from ..labels import UnlabeledReport, to_binary
from ..metrics import (
    MetricsReport,
    SingleClassPresent,
    auroc_binary,
    binary_report,
    confusion,
    multiclass_report,
)
from ..splits import CorpusSplit
from ..tokenization import TokenizerSpec, truncate_to_tokens

log = logging.getLogger(__name__)


class AllTrialsFailed(RuntimeError):
    pass


class InconsistentGrid(ValueError):
    pass


def prepare_examples(
    corpus: Corpus,
    report_ids,
    report_field: str,
    task: str,
    require_labels: bool = True,
) -> list[LabeledExample]:
    """Resolve report ids to backend examples, sorted by id.

    Sub-section experiments silently drop reports without an extracted
    sub-section; full-report experiments keep every report.
    """
    by_id = corpus.by_id()
    examples = []
    for rid in sorted(report_ids):
        report = by_id[rid]
        if report_field == "subsection":
            text = report.sub_section_text
            if text is None:
                continue
        else:
            text = report.full_text
        label = None
        if report.gold_label is not None:
            label = int(to_binary(report.gold_label)) if task == "binary" else int(
                report.gold_label
            )
        elif require_labels:
            raise UnlabeledReport(rid)
        examples.append(LabeledExample(rid, text, label))
    return examples


def truncate_examples(
    examples: list[LabeledExample], spec: TokenizerSpec, max_tokens: int
) -> list[LabeledExample]:
    return [
        LabeledExample(e.report_id, truncate_to_tokens(e.text, spec, max_tokens), e.label)
        for e in examples
    ]


def evaluate_predictions(
    predictions: PredictionSet, examples: list[LabeledExample], task: str
) -> MetricsReport:
    """Score a prediction set against the gold labels of its examples."""
    gold = [e.label for e in examples]
    if any(g is None for g in gold):
        raise UnlabeledReport(next(e.report_id for e in examples if e.label is None))
    pred = [predictions.argmax(e.report_id) for e in examples]
    if task == "binary":
        cm = confusion(gold, pred, 2)
        scores = [predictions[e.report_id][1] for e in examples]
        try:
            auroc = auroc_binary(scores, gold)
        except SingleClassPresent:
            log.warning("single gold class present; AUROC undefined")
            auroc = None
        return binary_report(cm, auroc=auroc)
    cm = confusion(gold, pred, 6)
    probs = np.array([predictions[e.report_id] for e in examples], dtype=float)
    try:
        return multiclass_report(cm, probs=probs, gold=gold)
    except SingleClassPresent:
        log.warning("single gold class present; AUROC undefined")
        return multiclass_report(cm)


@dataclass
class TrialFailure:
    trial_id: str
    error: str


@dataclass
class GridRunResult:
    trials: list[TrialResult]
    best: TrialResult
    failures: list[TrialFailure] = field(default_factory=list)
    optimization_metric: str = "auroc"


def _metric_value(result: TrialResult, optimization_metric: str) -> float:
    value = getattr(result.eval_metrics, optimization_metric)
    return float("-inf") if value is None else value


def _run_one(
    backend: ClassifierBackend,
    train_examples,
    eval_examples,
    cfg: TrialConfig,
    tokenizer_spec: TokenizerSpec,
    compute_dev_metrics: bool,
) -> TrialResult:
    started = time.perf_counter()
    train_cut = truncate_examples(train_examples, tokenizer_spec, cfg.max_tokens)
    eval_cut = truncate_examples(eval_examples, tokenizer_spec, cfg.max_tokens)
    checkpoint_ref, eval_preds = backend.fit(train_cut, eval_cut, cfg)
    eval_metrics = evaluate_predictions(eval_preds, eval_cut, cfg.task)
    dev_metrics = None
    if compute_dev_metrics:
        dev_examples = train_cut + eval_cut
        dev_preds = backend.predict(checkpoint_ref, dev_examples)
        dev_metrics = evaluate_predictions(dev_preds, dev_examples, cfg.task)
    return TrialResult(
        config=cfg,
        eval_metrics=eval_metrics,
        dev_metrics=dev_metrics,
        checkpoint_ref=checkpoint_ref,
        wall_time=time.perf_counter() - started,
    )


def run_grid(
    corpus: Corpus,
    split: CorpusSplit,
    grid: list[TrialConfig],
    backend: ClassifierBackend,
    tokenizer_spec: TokenizerSpec | None = None,
    parallelism: int = 1,
    compute_dev_metrics: bool = False,
) -> GridRunResult:
    """Run every trial, collect results in grid order, pick the best.

    Failed trials are logged and skipped; the sweep only raises if no
    trial completes. Best = argmax of the optimization metric on the
    evaluation split, earliest grid position winning ties, trials with
    an undefined metric ranking below all defined ones.
    """
    if not grid:
        raise InconsistentGrid("empty grid")
    tasks = {cfg.task for cfg in grid}
    metrics = {cfg.optimization_metric for cfg in grid}
    fields = {cfg.report_field for cfg in grid}
    if len(tasks) > 1 or len(metrics) > 1 or len(fields) > 1:
        raise InconsistentGrid(
            f"grid mixes tasks {tasks}, metrics {metrics} or fields {fields}"
        )
    task = tasks.pop()
    optimization_metric = metrics.pop()
    report_field = fields.pop()
    spec = tokenizer_spec or TokenizerSpec()

    train_examples = prepare_examples(corpus, split.train_report_ids, report_field, task)
    eval_examples = prepare_examples(corpus, split.eval_report_ids, report_field, task)

    completed: dict[int, TrialResult] = {}
    failures: list[tuple[int, TrialFailure]] = []

    def attempt(index_cfg):
        index, cfg = index_cfg
        try:
            return index, _run_one(
                backend, train_examples, eval_examples, cfg, spec, compute_dev_metrics
            ), None
        except (TrainingFailure, BackendUnavailable) as exc:
            log.warning("trial %s failed: %s", cfg.trial_id, exc)
            return index, None, TrialFailure(cfg.trial_id, str(exc))

    if parallelism <= 1:
        outcomes = map(attempt, enumerate(grid))
    else:
        pool = ThreadPoolExecutor(max_workers=parallelism)
        outcomes = pool.map(attempt, enumerate(grid))
    for index, result, failure in outcomes:
        if result is not None:
            completed[index] = result
        else:
            failures.append((index, failure))
    if parallelism > 1:
        pool.shutdown()

    if not completed:
        raise AllTrialsFailed(f"all {len(grid)} trials failed")
    ordered = [completed[i] for i in sorted(completed)]
    best = ordered[0]
    for result in ordered[1:]:
        if _metric_value(result, optimization_metric) > _metric_value(best, optimization_metric):
            best = result
    return GridRunResult(
        trials=ordered,
        best=best,
        failures=[f for _, f in sorted(failures, key=lambda pair: pair[0])],
        optimization_metric=optimization_metric,
    )


def validation_report_ids(corpus: Corpus, split: CorpusSplit) -> list[str]:
    return sorted(
        r.report_id for r in corpus.reports if r.patient_id in split.val_patient_ids
    )


def evaluate_validation(
    corpus: Corpus,
    split: CorpusSplit,
    best: TrialResult,
    backend: ClassifierBackend,
    tokenizer_spec: TokenizerSpec | None = None,
) -> MetricsReport:
    """Single prediction pass of the best checkpoint over held-out patients."""
    cfg = best.config
    spec = tokenizer_spec or TokenizerSpec()
    examples = prepare_examples(
        corpus, validation_report_ids(corpus, split), cfg.report_field, cfg.task
    )
    examples = truncate_examples(examples, spec, cfg.max_tokens)
    predictions = backend.predict(best.checkpoint_ref, examples)
    return evaluate_predictions(predictions, examples, cfg.task)


def _metrics_dict(metrics: MetricsReport | None):
    return None if metrics is None else json.loads(metrics.to_json())


def results_json(run: GridRunResult, validation: MetricsReport | None = None) -> str:
    """Canonical serialization: sorted keys, no wall times or timestamps.

    Reruns with identical data and configs produce byte-identical output.
    """
    payload = {
        "optimization_metric": run.optimization_metric,
        "best_trial_id": run.best.trial_id,
        "trials": [
            {
                "trial_id": result.trial_id,
                "config": result.config.to_dict(),
                "checkpoint_ref": result.checkpoint_ref,
                "eval_metrics": _metrics_dict(result.eval_metrics),
                "dev_metrics": _metrics_dict(result.dev_metrics),
            }
            for result in run.trials
        ],
        "failures": [{"trial_id": f.trial_id, "error": f.error} for f in run.failures],
        "validation_metrics": _metrics_dict(validation),
    }
    return json.dumps(payload, indent=2, sort_keys=True)
