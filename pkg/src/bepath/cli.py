"""Command-line pipeline: generate, preprocess, split, train, evaluate.

Commands compose through files (corpus JSONL, split JSON, results JSON)
and are idempotent: identical inputs and seeds give byte-identical
artifacts. Exit codes: 0 success, 1 usage or config error, 2 missing or
invalid data, 3 backend failure. Diagnostics go to stderr; artifacts and
tables go to stdout unless an output path is given.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, MissingInputFile, PipelineConfig, default_config_toml, load_config
from .corpus import (
    DuplicateReportId,
    GeneratorSpec,
    InvalidSpec,
    MalformedRecord,
    generate_synthetic,
    load_corpus,
    save_corpus,
    validate_corpus,
)
from .harness.backends import (
    BackendUnavailable,
    BaselineLinearBackend,
    TrainingFailure,
    WorkerBackend,
    WorkerProtocolError,
)
from .harness.baseline import NumericalOverflow
from .harness.config import TrialConfig, TrialResult
from .harness.grid import (
    AllTrialsFailed,
    evaluate_validation,
    prepare_examples,
    results_json,
    run_grid,
    truncate_examples,
)
from .harness.results import RULE_BASED_REFERENCE, ResultRow, emit_results
from .labels import UnknownLabel, UnlabeledReport
from .metrics import DegenerateMatrix, MetricsReport, SingleClassPresent
from .preprocess import preprocess_corpus
from .splits import (
    CorpusSplit,
    SplitLeakage,
    TooFewPatients,
    TooFewReports,
    check_no_leakage,
    make_split,
)
from .tokenization import MissingField, TokenizerSpec, VocabLoadError, stats_csv

log = logging.getLogger(__name__)

_USAGE_ERRORS = (ConfigError,)
_DATA_ERRORS = (
    MissingInputFile,
    MalformedRecord,
    DuplicateReportId,
    InvalidSpec,
    UnknownLabel,
    UnlabeledReport,
    VocabLoadError,
    MissingField,
    TooFewPatients,
    TooFewReports,
    SplitLeakage,
    DegenerateMatrix,
    SingleClassPresent,
    json.JSONDecodeError,
    OSError,
)
_BACKEND_ERRORS = (
    BackendUnavailable,
    TrainingFailure,
    AllTrialsFailed,
    WorkerProtocolError,
    NumericalOverflow,
)


class ResultsFileError(ValueError):
    """results.json is missing a field this command needs."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the pipeline reserves 2 for data
    # problems, so remap to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _write_or_print(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text, encoding="utf-8")


def _effective_seed(args, config: PipelineConfig) -> int:
    return config.seed if args.seed is None else args.seed


def _corpus_path(args, config: PipelineConfig) -> Path:
    path = Path(args.corpus) if getattr(args, "corpus", None) else config.corpus_path
    if path is None:
        raise ConfigError("no corpus given: pass --corpus or set data.corpus_path")
    return path


def _split_path(args, config: PipelineConfig) -> Path:
    path = Path(args.split) if getattr(args, "split", None) else config.split_path
    if path is None:
        raise ConfigError("no split given: pass --split or set data.split_path")
    return path


def _run_dir(args, config: PipelineConfig) -> Path:
    return Path(args.run_dir) if getattr(args, "run_dir", None) else config.output_dir


def _load_split(path: Path) -> CorpusSplit:
    return CorpusSplit.from_json(Path(path).read_text(encoding="utf-8"))


def _backend_for(name: str, config: PipelineConfig, run_dir: Path):
    checkpoints = run_dir / "checkpoints"
    if name == "baseline":
        return BaselineLinearBackend(checkpoints, tokenizer_spec=config.tokenizer_spec())
    if not config.worker_command:
        raise BackendUnavailable("worker backend requested but worker.command is empty")
    return WorkerBackend(list(config.worker_command), checkpoint_dir=checkpoints)


def _backend_name_for_model(model_type: str) -> str:
    return "baseline" if model_type == "baseline_linear" else "worker"


def _load_results(path: Path) -> dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if "trials" not in data or "best_trial_id" not in data:
        raise ResultsFileError(f"{path} is not a results file")
    return data


def _best_trial(results: dict) -> TrialResult:
    best_id = results["best_trial_id"]
    for trial in results["trials"]:
        if trial["trial_id"] == best_id:
            return TrialResult(
                config=TrialConfig.from_dict(trial["config"]),
                eval_metrics=None,
                dev_metrics=None,
                checkpoint_ref=trial["checkpoint_ref"],
                wall_time=0.0,
            )
    raise ResultsFileError(f"best trial {best_id!r} not found in results")


def _metrics_from_dict(data: dict) -> MetricsReport:
    return MetricsReport(
        recall=data["recall"],
        precision=data["precision"],
        accuracy=data["accuracy"],
        f1=data["f1"],
        f2_beta=data["f2_beta"],
        auroc=data.get("auroc"),
        per_class=(),
        averaging=data.get("averaging", ""),
        convention=data.get("convention", ""),
    )


def cmd_config(args, config: PipelineConfig) -> int:
    # --print-defaults is the documented spelling; with or without it,
    # the only output this command has is the default TOML.
    sys.stdout.write(default_config_toml())
    return 0


def cmd_generate(args, config: PipelineConfig) -> int:
    spec = GeneratorSpec(
        n_patients=args.patients if args.patients is not None else config.n_patients,
        class_mix=config.class_mix,
        reports_per_patient=config.reports_per_patient,
        negation_distractor_rate=config.negation_distractor_rate,
        seed=_effective_seed(args, config),
    )
    corpus = generate_synthetic(spec)
    save_corpus(corpus, args.out)
    print(f"wrote {len(corpus.reports)} reports for {spec.n_patients} patients to {args.out}",
          file=sys.stderr)
    return 0


def cmd_preprocess(args, config: PipelineConfig) -> int:
    corpus = load_corpus(_corpus_path(args, config))
    report = validate_corpus(corpus)
    if not report.ok:
        print(report.to_json(), file=sys.stderr)
        raise MalformedRecord(0, f"{len(report.violations)} corpus violations")
    processed, rejects = preprocess_corpus(corpus, mode=args.mode,
                                           lexicon=config.heading_lexicon())
    save_corpus(processed, args.out)
    print(f"preprocessed {len(processed.reports)} reports ({args.mode} mode), "
          f"{len(rejects)} without a diagnosis section", file=sys.stderr)
    return 0


def cmd_split(args, config: PipelineConfig) -> int:
    corpus = load_corpus(_corpus_path(args, config))
    split = make_split(
        corpus,
        val_fraction=args.val_fraction if args.val_fraction is not None else config.val_fraction,
        eval_fraction=(
            args.eval_fraction if args.eval_fraction is not None else config.eval_fraction
        ),
        seed=_effective_seed(args, config),
        stratify=args.stratify or config.stratify,
    )
    check_no_leakage(split, corpus)
    Path(args.out).write_text(split.to_json() + "\n", encoding="utf-8")
    print(
        f"split {len(split.dev_patient_ids)} dev / {len(split.val_patient_ids)} val patients; "
        f"{len(split.train_report_ids)} train / {len(split.eval_report_ids)} eval reports",
        file=sys.stderr,
    )
    return 0


def cmd_stats(args, config: PipelineConfig) -> int:
    corpus = load_corpus(_corpus_path(args, config))
    kind = args.tokenizer or config.tokenizer_kind
    vocab = args.vocab or (str(config.vocab_path) if config.vocab_path else None)
    if kind == "wordpiece" and not vocab:
        raise ConfigError("wordpiece tokenizer needs --vocab or tokenizer.vocab_path")
    spec = TokenizerSpec(kind=kind, vocab_path=vocab, lowercase=config.lowercase)
    fields = ("subsection", "full") if args.field == "both" else (args.field,)
    name = args.name or spec.kind
    _write_or_print(stats_csv(corpus, [(name, spec)], fields=fields), args.out)
    return 0


def cmd_train(args, config: PipelineConfig) -> int:
    grid = config.grid()
    if args.dry_run:
        for cfg in grid:
            print(f"{cfg.trial_id} batch_size={cfg.batch_size} epochs={cfg.epochs} "
                  f"task={cfg.task} metric={cfg.optimization_metric}")
        return 0
    wanted = {_backend_name_for_model(cfg.model_type) for cfg in grid}
    if wanted != {args.backend}:
        raise ConfigError(
            f"grid.model_types {sorted({c.model_type for c in grid})} need backend(s) "
            f"{sorted(wanted)}, but --backend is {args.backend}"
        )
    corpus = load_corpus(_corpus_path(args, config))
    split = _load_split(_split_path(args, config))
    run_dir = _run_dir(args, config)
    run_dir.mkdir(parents=True, exist_ok=True)
    backend = _backend_for(args.backend, config, run_dir)
    try:
        run = run_grid(
            corpus,
            split,
            grid,
            backend,
            tokenizer_spec=config.tokenizer_spec(),
            parallelism=args.parallelism or config.parallelism,
        )
    finally:
        if hasattr(backend, "close"):
            backend.close()
    (run_dir / "results.json").write_text(results_json(run) + "\n", encoding="utf-8")
    for failure in run.failures:
        print(f"trial failed: {failure.trial_id}: {failure.error}", file=sys.stderr)
    print(f"{len(run.trials)} trials completed, {len(run.failures)} failed; "
          f"best {run.best.trial_id} ({run.optimization_metric})", file=sys.stderr)
    print(run.best.trial_id)
    return 0


def cmd_evaluate(args, config: PipelineConfig) -> int:
    run_dir = _run_dir(args, config)
    results_path = Path(args.results) if args.results else run_dir / "results.json"
    results = _load_results(results_path)
    best = _best_trial(results)
    corpus = load_corpus(_corpus_path(args, config))
    split = _load_split(_split_path(args, config))
    backend = _backend_for(_backend_name_for_model(best.config.model_type), config, run_dir)
    try:
        metrics = evaluate_validation(corpus, split, best, backend,
                                      tokenizer_spec=config.tokenizer_spec())
    finally:
        if hasattr(backend, "close"):
            backend.close()
    # Fold the validation metrics back into results.json so report can
    # build tables from one file; rewriting is deterministic.
    results["validation_metrics"] = json.loads(metrics.to_json())
    results_path.write_text(
        json.dumps(results, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_or_print(metrics.to_json(), args.out)
    return 0


def cmd_predict(args, config: PipelineConfig) -> int:
    run_dir = _run_dir(args, config)
    results_path = Path(args.results) if args.results else run_dir / "results.json"
    results = _load_results(results_path)
    best = _best_trial(results)
    cfg = best.config
    checkpoint = args.checkpoint or best.checkpoint_ref
    corpus = load_corpus(_corpus_path(args, config))
    examples = prepare_examples(
        corpus,
        [r.report_id for r in corpus.reports],
        cfg.report_field,
        cfg.task,
        require_labels=False,
    )
    examples = truncate_examples(examples, config.tokenizer_spec(), cfg.max_tokens)
    backend = _backend_for(_backend_name_for_model(cfg.model_type), config, run_dir)
    try:
        predictions = backend.predict(checkpoint, examples)
    finally:
        if hasattr(backend, "close"):
            backend.close()
    lines = []
    for example in examples:
        probs = predictions[example.report_id]
        lines.append(json.dumps({
            "report_id": example.report_id,
            "probs": [round(p, 6) for p in probs],
            "predicted_class": predictions.argmax(example.report_id),
        }))
    _write_or_print("\n".join(lines) + "\n", args.out)
    return 0


def cmd_report(args, config: PipelineConfig) -> int:
    rows = []
    tasks = set()
    for path in args.results:
        results = _load_results(Path(path))
        best = _best_trial(results)
        metrics_dict = results.get("validation_metrics")
        if metrics_dict is None:
            raise ResultsFileError(f"{path} has no validation metrics; run evaluate first")
        tasks.add(best.config.task)
        rows.append(ResultRow(
            report_type=best.config.report_field,
            model=best.config.model_type,
            metrics=_metrics_from_dict(metrics_dict),
        ))
    comparator = None
    if args.with_comparator:
        if len(tasks) != 1:
            raise ResultsFileError(f"comparator rows need a single task, got {sorted(tasks)}")
        comparator = [RULE_BASED_REFERENCE[(tasks.pop(), "validation")]]
    csv_text, json_rows = emit_results(rows, comparator)
    _write_or_print(csv_text, args.out)
    if args.json_out:
        Path(args.json_out).write_text(
            json.dumps(json_rows, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bepath", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML config file (defaults apply when omitted)")
    common.add_argument("--seed", type=int, help="override the config seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("config", parents=[common], help="show configuration defaults")
    p.add_argument("--print-defaults", action="store_true",
                   help="print the full default config as TOML")
    p.set_defaults(func=cmd_config)

    p = sub.add_parser("generate", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--patients", type=int, help="number of patients")
    p.add_argument("--out", required=True, help="output corpus JSONL")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("preprocess", parents=[common],
                       help="clean text and extract diagnosis sub-sections")
    p.add_argument("--corpus", help="input corpus JSONL")
    p.add_argument("--mode", choices=("full", "subsection"), default="subsection")
    p.add_argument("--out", required=True, help="output corpus JSONL")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("split", parents=[common],
                       help="patient-level dev/val and report-level train/eval split")
    p.add_argument("--corpus", help="input corpus JSONL")
    p.add_argument("--val-fraction", type=float, help="fraction of patients held out")
    p.add_argument("--eval-fraction", type=float,
                   help="fraction of development reports used for evaluation")
    p.add_argument("--stratify", action="store_true",
                   help="stratify the patient split by most severe diagnosis")
    p.add_argument("--out", required=True, help="output split JSON")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("stats", parents=[common], help="token-count statistics as CSV")
    p.add_argument("--corpus", help="input corpus JSONL")
    p.add_argument("--tokenizer", choices=("whitespace", "wordpiece"))
    p.add_argument("--vocab", help="vocabulary file for wordpiece")
    p.add_argument("--name", help="tokenizer label in the output table")
    p.add_argument("--field", choices=("subsection", "full", "both"), default="both")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", parents=[common], help="run the hyperparameter grid")
    p.add_argument("--corpus", help="input corpus JSONL")
    p.add_argument("--split", help="split JSON")
    p.add_argument("--backend", choices=("baseline", "worker"), default="baseline")
    p.add_argument("--run-dir", help="directory for checkpoints and results.json")
    p.add_argument("--parallelism", type=int, help="concurrent trials")
    p.add_argument("--dry-run", action="store_true",
                   help="print the expanded grid without training")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common],
                       help="score the best checkpoint on held-out validation patients")
    p.add_argument("--corpus", help="input corpus JSONL")
    p.add_argument("--split", help="split JSON")
    p.add_argument("--results", help="results.json from train (default: run dir)")
    p.add_argument("--run-dir", help="directory holding checkpoints")
    p.add_argument("--out", help="output metrics JSON path (default: stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", parents=[common],
                       help="emit per-report probabilities from a trained checkpoint")
    p.add_argument("--corpus", help="input corpus JSONL")
    p.add_argument("--results", help="results.json naming the checkpoint")
    p.add_argument("--checkpoint", help="checkpoint ref (default: best from results)")
    p.add_argument("--run-dir", help="directory holding checkpoints")
    p.add_argument("--out", help="output JSONL path (default: stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", parents=[common], help="result table as CSV")
    p.add_argument("--results", nargs="+", required=True,
                   help="one or more results.json files, one table row each")
    p.add_argument("--with-comparator", action="store_true",
                   help="append the published rule-based reference row")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--json-out", help="also write rows as JSON")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        return args.func(args, config) or 0
    except _BACKEND_ERRORS as exc:
        print(f"bepath: backend error: {exc}", file=sys.stderr)
        return 3
    except ResultsFileError as exc:
        print(f"bepath: {exc}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as exc:
        print(f"bepath: data error: {exc}", file=sys.stderr)
        return 2
    except _USAGE_ERRORS as exc:
        print(f"bepath: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
