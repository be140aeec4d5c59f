"""Acceptance gate: one marked test (or class) per release criterion.

The terminal summary prints a PASS/FAIL line per criterion number; see
conftest. Oracles live in oracles.py and are deliberately independent of
the library implementations they check.
"""

import importlib.util
import math
import random
import sys
import time

import numpy as np
import pytest
import scipy.sparse as sp
from conftest import make_counted_corpus
from oracles import (
    central_difference_grads,
    collapse_macro,
    macro_pairwise_auroc,
    pairwise_auroc,
)

from bepath.cli import main
from bepath.corpus import DEFAULT_CLASS_MIX, Corpus, GeneratorSpec, generate_synthetic
from bepath.harness.backends import BaselineLinearBackend
from bepath.harness.baseline import loss_and_grad
from bepath.harness.config import expand_grid
from bepath.harness.grid import (
    evaluate_validation,
    results_json,
    run_grid,
    validation_report_ids,
)
from bepath.labels import BinaryLabel, binarize_corpus, class_distribution, distribution_csv
from bepath.metrics import (
    ConfusionMatrix,
    auroc_binary,
    auroc_macro_ovr,
    binary_report,
    multiclass_report,
)
from bepath.preprocess import preprocess_corpus
from bepath.splits import make_split
from bepath.tokenization import TokenizerSpec, stats_csv, token_stats

TOL = 5e-4

DEV_COUNTS = (11, 30, 18, 15, 88, 139)
VAL_COUNTS = (22, 26, 8, 22, 99, 141)


def assert_binary_row(tp, fp, fn, tn, recall, precision, accuracy, f1, f2=None):
    started = time.perf_counter()
    report = binary_report(ConfusionMatrix.binary(tp=tp, fp=fp, fn=fn, tn=tn))
    elapsed = time.perf_counter() - started
    assert report.recall == pytest.approx(recall, abs=TOL)
    assert report.precision == pytest.approx(precision, abs=TOL)
    assert report.accuracy == pytest.approx(accuracy, abs=TOL)
    assert report.f1 == pytest.approx(f1, abs=TOL)
    if f2 is not None:
        assert report.f2_beta == pytest.approx(f2, abs=TOL)
    assert elapsed < 1.0


@pytest.mark.criterion(1, "binary metrics reproduce the reference validation sub-section row")
def test_binary_oracle_validation_subsection():
    assert_binary_row(56, 7, 0, 255, recall=1.000, precision=0.889, accuracy=0.978, f1=0.964)


@pytest.mark.criterion(2, "binary metrics reproduce the reference validation full-report row")
def test_binary_oracle_validation_full():
    assert_binary_row(
        51, 6, 5, 256, recall=0.911, precision=0.895, accuracy=0.965, f1=0.941, f2=0.943
    )


@pytest.mark.criterion(3, "binary metrics reproduce the reference development row")
def test_binary_oracle_development():
    assert_binary_row(56, 0, 3, 242, recall=0.949, precision=1.000, accuracy=0.990, f1=0.984)


@pytest.mark.criterion(4, "class distribution totals, percents, and binary collapse counts")
def test_dataset_bookkeeping():
    for counts, total, eac_pct, positives in (
        (DEV_COUNTS, 301, 3.7, 59),
        (VAL_COUNTS, 318, 6.9, 56),
    ):
        corpus = make_counted_corpus(counts)
        rows = class_distribution(corpus)
        assert [count for _, count, _ in rows] == list(counts)
        assert sum(count for _, count, _ in rows) == total
        assert round(rows[0][2], 1) == eac_pct
        binary = binarize_corpus(corpus)
        assert len(binary) == total
        assert sum(label == BinaryLabel.DYSPLASIA_OR_WORSE for _, label in binary) == positives
    # one-decimal rendering
    assert "eac,11,3.7" in distribution_csv(class_distribution(make_counted_corpus(DEV_COUNTS)))


@pytest.mark.criterion(5, "rank-based AUROC equals the quadratic pairwise oracle")
def test_auroc_against_pairwise_oracle():
    rng = random.Random(50201)
    for _ in range(500):
        while True:
            n = rng.randint(2, 50)
            gold = [rng.randint(0, 1) for _ in range(n)]
            if 0 < sum(gold) < n:
                break
        scores = [rng.randrange(0, 8) / 7 for _ in range(n)]  # coarse grid forces ties
        assert math.isclose(
            auroc_binary(scores, gold), pairwise_auroc(scores, gold), abs_tol=1e-12
        )

    nprng = np.random.default_rng(50202)
    for _ in range(100):
        n = int(nprng.integers(4, 40))
        k = int(nprng.integers(2, 7))
        probs = nprng.random((n, k))
        probs /= probs.sum(axis=1, keepdims=True)
        while True:
            gold = nprng.integers(0, k, size=n)
            if len(set(gold.tolist())) >= 2:
                break
        assert math.isclose(
            auroc_macro_ovr(probs, gold),
            macro_pairwise_auroc(probs.tolist(), gold.tolist()),
            abs_tol=1e-12,
        )


@pytest.mark.criterion(6, "macro metrics equal an independent per-class collapse oracle")
def test_macro_metrics_against_collapse_oracle():
    rng = random.Random(60606)
    for _ in range(200):
        k = rng.randint(2, 6)
        counts = [[rng.randint(0, 25) for _ in range(k)] for _ in range(k)]
        counts[rng.randrange(k)][rng.randrange(k)] += 1
        expected = collapse_macro(counts)
        report = multiclass_report(ConfusionMatrix(np.array(counts)))
        for name, value in expected.items():
            assert getattr(report, name) == value, name


@pytest.mark.criterion(7, "analytic gradients match central finite differences")
def test_gradients_against_finite_differences():
    rng = np.random.default_rng(70707)
    for _ in range(50):
        n = int(rng.integers(2, 10))
        d = int(rng.integers(3, 12))
        k = int(rng.integers(2, 5))
        x = sp.csr_matrix(rng.integers(-3, 4, size=(n, d)).astype(float))
        y = rng.integers(0, k, size=n)
        weights = rng.normal(scale=0.5, size=(d, k))
        bias = rng.normal(scale=0.5, size=k)

        def loss_fn(w, b):
            return loss_and_grad(np.asarray(w, dtype=float), np.asarray(b, dtype=float), x, y)[0]

        _, grad_w, grad_b = loss_and_grad(weights, bias, x, y)
        fd_w, fd_b = central_difference_grads(loss_fn, weights.tolist(), bias.tolist())
        analytic = np.concatenate([np.ravel(grad_w), np.ravel(grad_b)])
        numeric = np.concatenate([np.ravel(fd_w), np.ravel(fd_b)])
        rel = np.linalg.norm(analytic - numeric) / max(
            np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12
        )
        assert rel <= 1e-4


COMBOS = tuple((task, field) for task in ("multiclass", "binary") for field in ("subsection", "full"))


def pipeline_once(checkpoint_root):
    """The frozen end-to-end recipe; returns per-combo runs and serialized results."""
    corpus = generate_synthetic(
        GeneratorSpec(n_patients=150, class_mix=DEFAULT_CLASS_MIX, seed=7)
    )
    sectioned, rejects = preprocess_corpus(corpus, mode="subsection")
    full_only, _ = preprocess_corpus(corpus, mode="full")
    assert not rejects and len(full_only.reports) == len(corpus.reports)
    split = make_split(sectioned, val_fraction=0.5, eval_fraction=61 / 301, seed=2)
    out = {}
    for task, field in COMBOS:
        backend = BaselineLinearBackend(checkpoint_root / f"{task}-{field}")
        grid = expand_grid(["baseline_linear"], task, field, "auroc")
        run = run_grid(sectioned, split, grid, backend)
        metrics = evaluate_validation(sectioned, split, run.best, backend)
        out[(task, field)] = {
            "run": run,
            "metrics": metrics,
            "json": results_json(run, metrics),
        }
    return {"corpus": corpus, "sectioned": sectioned, "split": split, "combos": out}


@pytest.fixture(scope="module")
def e2e(tmp_path_factory):
    started = time.perf_counter()
    state = pipeline_once(tmp_path_factory.mktemp("e2e-checkpoints"))
    state["elapsed"] = time.perf_counter() - started
    return state


@pytest.mark.criterion(8, "end-to-end synthetic run clears the macro-F1 floors in budget")
def test_end_to_end_macro_f1(e2e):
    floors = {"multiclass": 0.90, "binary": 0.95}
    for (task, field), combo in e2e["combos"].items():
        assert combo["metrics"].f1 >= floors[task], (task, field, combo["metrics"].f1)
    assert e2e["elapsed"] < 300.0


class TouchTracker:
    """Report proxy that records every read of a text-bearing attribute."""

    def __init__(self, report, touched):
        self._report = report
        self._touched = touched

    def __getattr__(self, name):
        if name in ("full_text", "sub_section_text"):
            self._touched.append(self._report.report_id)
        return getattr(self._report, name)


@pytest.mark.criterion(9, "no validation text is read during the sweep; reruns are byte-identical")
def test_leakage_and_determinism(e2e, tmp_path_factory):
    touched: list[str] = []
    spied = Corpus([TouchTracker(r, touched) for r in e2e["sectioned"].reports])
    split = e2e["split"]
    val_ids = set(validation_report_ids(e2e["sectioned"], split))
    assert val_ids

    backend = BaselineLinearBackend(tmp_path_factory.mktemp("spy-checkpoints"))
    grid = expand_grid(["baseline_linear"], "multiclass", "subsection", "auroc")
    run = run_grid(spied, split, grid, backend)
    assert not val_ids & set(touched), "validation text was read during the sweep"

    before = len(touched)
    evaluate_validation(spied, split, run.best, backend)
    assert val_ids & set(touched[before:]), "instrumentation failed to observe validation reads"

    rerun = pipeline_once(tmp_path_factory.mktemp("rerun-checkpoints"))
    for combo in COMBOS:
        assert rerun["combos"][combo]["json"] == e2e["combos"][combo]["json"], combo


@pytest.mark.criterion(10, "token stats emit the exact column set; sub-section p50 <= full p50")
def test_token_stats_shape(e2e):
    spec = TokenizerSpec()
    csv_text = stats_csv(e2e["sectioned"], [("whitespace", spec)])
    lines = csv_text.strip().splitlines()
    header = lines[0].split(",")
    assert header[2:] == ["Min", "25p", "50p", "75p", "Max", "%>512"]
    assert len(lines) == 3  # one row per (tokenizer, field)
    sub = token_stats(e2e["sectioned"], spec, "subsection")
    full = token_stats(e2e["sectioned"], spec, "full")
    assert sub.p50 <= full.p50


@pytest.mark.criterion(11, "dry-run grid expands to exactly 6 short-input + 18 long-input trials")
def test_grid_shape_via_cli(tmp_path, capsys):
    config = tmp_path / "transformers.toml"
    config.write_text('[grid]\nmodel_types = ["clinical_bert", "clinical_bigbird"]\n')
    assert main(["train", "--config", str(config), "--dry-run"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 24
    assert sum(line.startswith("clinical_bert-") for line in lines) == 6
    assert sum(line.startswith("clinical_bigbird-") for line in lines) == 18


HAS_WORKER = importlib.util.find_spec("trainer_worker") is not None


@pytest.mark.criterion(12, "worker completes the wire protocol with a miniature model")
@pytest.mark.skipif(not HAS_WORKER, reason="trainer worker package not installed")
def test_worker_protocol_round_trip(tmp_path):
    from bepath.harness.backends import (
        BackendUnavailable,
        LabeledExample,
        TrainingFailure,
        WorkerBackend,
    )
    from bepath.harness.config import TrialConfig
    from trainer_worker.testing import build_miniature_model

    started = time.perf_counter()
    model_dir = build_miniature_model(tmp_path / "mini")
    command = [
        sys.executable, "-m", "trainer_worker",
        "--model", f"clinical_bert={model_dir}",
        "--model", f"clinical_bigbird={model_dir}",
    ]
    cfg = TrialConfig(
        model_type="clinical_bert",
        max_tokens=512,
        learning_rate=2e-5,
        seed=0,
        batch_size=4,
        epochs=1,
        task="multiclass",
        report_field="subsection",
        optimization_metric="auroc",
    )
    words = ("dysplasia", "carcinoma", "benign", "mucosa", "barretts")
    train_set = [
        LabeledExample(f"t{i}", f"{words[i % 5]} finding number {i}", i % 6) for i in range(10)
    ]
    eval_set = [LabeledExample(f"e{i}", f"{words[(i + 2) % 5]} sample {i}", None) for i in range(10)]

    backend = WorkerBackend(command, checkpoint_dir=tmp_path / "ckpt")
    try:
        ref, preds = backend.fit(train_set, eval_set, cfg)
        assert preds.covers([e.report_id for e in eval_set])
        for example in eval_set:
            row = preds[example.report_id]
            assert len(row) == 6
            assert abs(sum(row) - 1.0) <= 1e-6
        again = backend.predict(ref, eval_set[:3])
        assert again.covers([e.report_id for e in eval_set[:3]])
        with pytest.raises(BackendUnavailable):
            backend.predict("no-such-checkpoint", eval_set[:1])
        bad = TrialConfig(
            model_type="clinical_bigbird",
            max_tokens=512,
            learning_rate=2e-5,
            seed=0,
            batch_size=4,
            epochs=1,
            task="multiclass",
            report_field="subsection",
            optimization_metric="auroc",
        )
        backend_bad = WorkerBackend(
            [sys.executable, "-m", "trainer_worker", "--model", "clinical_bert=/nowhere"],
            checkpoint_dir=tmp_path / "ckpt2",
            model_names={"clinical_bert", "clinical_bigbird"},
        )
        try:
            with pytest.raises(TrainingFailure):
                backend_bad.fit(train_set, eval_set, bad)
        finally:
            backend_bad.close()
    finally:
        backend.close()
    assert time.perf_counter() - started < 600.0
