"""Classifier backends behind a single fit/predict contract.

The harness truncates texts before they reach a backend; backends never
see more than the configured token budget. The baseline backend runs
in-process and is fully deterministic. The worker backend drives an
out-of-process fine-tuning worker over newline-delimited JSON on stdio,
one request in flight at a time.
"""

from __future__ import annotations

import json
import os
import subprocess
from pathlib import Path
from typing import Protocol

import numpy as np

from .baseline import DEFAULT_FEATURE_DIM, BaselineModel, featurize, train
from .config import PredictionSet, TrialConfig
from ..tokenization import TokenizerSpec

PROTO_VERSION = 1


class TrainingFailure(RuntimeError):
    pass


class BackendUnavailable(RuntimeError):
    pass


class LabeledExample:
    """One report as seen by a backend: id, (truncated) text, optional label."""

    __slots__ = ("report_id", "text", "label")

    def __init__(self, report_id: str, text: str, label: int | None = None):
        self.report_id = report_id
        self.text = text
        self.label = label

    def __repr__(self):
        return f"LabeledExample({self.report_id!r}, label={self.label})"


class ClassifierBackend(Protocol):
    name: str

    def fit(
        self, train_set: list[LabeledExample], eval_set: list[LabeledExample], cfg: TrialConfig
    ) -> tuple[str, PredictionSet]:
        ...

    def predict(self, checkpoint_ref: str, examples: list[LabeledExample]) -> PredictionSet:
        ...


def _prediction_set(ids, probs: np.ndarray) -> PredictionSet:
    rows = {}
    for rid, row in zip(ids, probs):
        row = np.asarray(row, dtype=float)
        rows[rid] = tuple(row / row.sum())
    return PredictionSet(rows)


class BaselineLinearBackend:
    """In-process hashed bag-of-words softmax regression."""

    name = "baseline_linear"

    def __init__(
        self,
        checkpoint_dir,
        tokenizer_spec: TokenizerSpec | None = None,
        n_features: int = DEFAULT_FEATURE_DIM,
    ):
        self.checkpoint_dir = Path(checkpoint_dir)
        self.tokenizer_spec = tokenizer_spec or TokenizerSpec()
        self.n_features = n_features

    def fit(self, train_set, eval_set, cfg: TrialConfig):
        if not train_set:
            raise TrainingFailure("empty training set")
        if any(e.label is None for e in train_set):
            raise TrainingFailure("unlabeled example in training set")
        x = featurize([e.text for e in train_set], self.tokenizer_spec, self.n_features)
        y = np.array([e.label for e in train_set], dtype=np.int64)
        try:
            model = train(x, y, cfg.n_classes, cfg.learning_rate, cfg.epochs)
        except ArithmeticError as exc:
            raise TrainingFailure(str(exc)) from exc
        self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
        checkpoint_ref = cfg.trial_id
        model.save(self.checkpoint_dir / f"{checkpoint_ref}.npz")
        return checkpoint_ref, self.predict(checkpoint_ref, eval_set)

    def predict(self, checkpoint_ref: str, examples) -> PredictionSet:
        path = self.checkpoint_dir / f"{checkpoint_ref}.npz"
        if not path.exists():
            raise BackendUnavailable(f"no checkpoint {checkpoint_ref!r} in {self.checkpoint_dir}")
        model = BaselineModel.load(path)
        x = featurize([e.text for e in examples], self.tokenizer_spec, self.n_features)
        probs = model.predict_proba(x)
        return _prediction_set([e.report_id for e in examples], probs)


class StubBackend:
    """Scripted backend for tests: fixed probabilities per report id.

    scripts maps trial_id -> {report_id -> probability row}; fit and
    predict replay them. Records every text it is handed so tests can
    assert what reached the backend boundary.
    """

    name = "stub"

    def __init__(self, scripts: dict[str, dict[str, tuple[float, ...]]]):
        self.scripts = scripts
        self.seen_texts: list[str] = []
        self.fit_calls: list[str] = []

    def _replay(self, trial_id: str, examples) -> PredictionSet:
        table = self.scripts[trial_id]
        return PredictionSet({e.report_id: tuple(table[e.report_id]) for e in examples})

    def fit(self, train_set, eval_set, cfg: TrialConfig):
        if not train_set:
            raise TrainingFailure("empty training set")
        self.fit_calls.append(cfg.trial_id)
        self.seen_texts.extend(e.text for e in train_set + eval_set)
        if cfg.trial_id not in self.scripts:
            raise TrainingFailure(f"no script for {cfg.trial_id}")
        return cfg.trial_id, self._replay(cfg.trial_id, eval_set)

    def predict(self, checkpoint_ref: str, examples) -> PredictionSet:
        self.seen_texts.extend(e.text for e in examples)
        if checkpoint_ref not in self.scripts:
            raise BackendUnavailable(f"unknown checkpoint {checkpoint_ref!r}")
        return self._replay(checkpoint_ref, examples)


class WorkerProtocolError(RuntimeError):
    pass


class WorkerClient:
    """Newline-delimited JSON driver for an out-of-process training worker."""

    def __init__(self, command: list[str], checkpoint_dir=None, env=None):
        self.command = list(command)
        self.checkpoint_dir = checkpoint_dir
        self._proc: subprocess.Popen | None = None
        self._env = env

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.close()

    def start(self) -> None:
        env = dict(os.environ if self._env is None else self._env)
        if self.checkpoint_dir is not None:
            env["BEPATH_WORKER_CHECKPOINT_DIR"] = str(self.checkpoint_dir)
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                env=env,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BackendUnavailable(f"cannot spawn worker {self.command}: {exc}") from exc
        reply = self.request({"kind": "hello", "proto_version": PROTO_VERSION})
        if reply.get("kind") != "ready" or reply.get("proto_version") != PROTO_VERSION:
            self.close()
            raise BackendUnavailable(f"worker handshake failed: {reply}")

    def request(self, message: dict, *, terminal_kinds=("ready", "trained", "predicted", "error")):
        """Send one request and read messages until a terminal response."""
        if self._proc is None or self._proc.poll() is not None:
            raise BackendUnavailable("worker process is not running")
        self._proc.stdin.write(json.dumps(message) + "\n")
        self._proc.stdin.flush()
        while True:
            line = self._proc.stdout.readline()
            if not line:
                raise WorkerProtocolError("worker closed its stdout mid-request")
            try:
                reply = json.loads(line)
            except json.JSONDecodeError as exc:
                raise WorkerProtocolError(f"non-JSON line from worker: {line!r}") from exc
            if reply.get("kind") in terminal_kinds:
                return reply
            # progress and other informational messages are skipped

    def close(self) -> None:
        if self._proc is None:
            return
        if self._proc.poll() is None:
            try:
                self._proc.stdin.write(json.dumps({"kind": "shutdown"}) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, ValueError):
                pass
            try:
                self._proc.wait(timeout=30)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._proc = None


class WorkerBackend:
    """Backend that delegates fit/predict to a worker subprocess."""

    name = "worker"

    _MODEL_NAMES = {"clinical_bert", "clinical_bigbird"}

    def __init__(self, command: list[str], checkpoint_dir=None, model_names=None):
        self.command = command
        self.checkpoint_dir = checkpoint_dir
        self.model_names = set(model_names) if model_names is not None else self._MODEL_NAMES
        self._client: WorkerClient | None = None

    def _ensure_client(self) -> WorkerClient:
        if self._client is None:
            self._client = WorkerClient(self.command, checkpoint_dir=self.checkpoint_dir)
            self._client.start()
        return self._client

    def close(self) -> None:
        if self._client is not None:
            self._client.close()
            self._client = None

    def fit(self, train_set, eval_set, cfg: TrialConfig):
        if not train_set:
            raise TrainingFailure("empty training set")
        if cfg.model_type not in self.model_names:
            raise TrainingFailure(f"worker has no model {cfg.model_type!r}")
        client = self._ensure_client()
        reply = client.request(
            {
                "kind": "train",
                "trial_id": cfg.trial_id,
                "model_name": cfg.model_type,
                "num_labels": cfg.n_classes,
                "max_tokens": cfg.max_tokens,
                "learning_rate": cfg.learning_rate,
                "seed": cfg.seed,
                "batch_size": cfg.batch_size,
                "epochs": cfg.epochs,
                "train": [
                    {"id": e.report_id, "text": e.text, "label": int(e.label)} for e in train_set
                ],
                "eval": [{"id": e.report_id, "text": e.text} for e in eval_set],
            },
            terminal_kinds=("trained", "error"),
        )
        if reply["kind"] == "error":
            raise TrainingFailure(f"{reply.get('code')}: {reply.get('detail')}")
        preds = PredictionSet(
            {row["id"]: tuple(row["probs"]) for row in reply["eval_predictions"]}
        )
        return reply["checkpoint_id"], preds

    def predict(self, checkpoint_ref: str, examples) -> PredictionSet:
        client = self._ensure_client()
        reply = client.request(
            {
                "kind": "predict",
                "checkpoint_id": checkpoint_ref,
                "reports": [{"id": e.report_id, "text": e.text} for e in examples],
            },
            terminal_kinds=("predicted", "error"),
        )
        if reply["kind"] == "error":
            raise BackendUnavailable(f"{reply.get('code')}: {reply.get('detail')}")
        return PredictionSet({row["id"]: tuple(row["probs"]) for row in reply["predictions"]})
