"""Fine-tunes a pretrained sequence classifier per train request.

Determinism is best effort: every random source is seeded from the
request and torch runs on one CPU thread, so fixed-seed reruns on the
same machine agree closely, but bitwise equality across hardware or
library versions is not promised.
"""

import hashlib
import json
import logging
import math
import os
import random
import tempfile
from pathlib import Path

import numpy as np
import torch

from .protocol import BadRequest, ModelUnavailable, OutOfMemory

log = logging.getLogger(__name__)

# published checkpoints; tests remap these to local miniatures
DEFAULT_MODEL_MAP = {
    "clinical_bert": "emilyalsentzer/Bio_ClinicalBERT",
    "clinical_bigbird": "yikuan8/Clinical-BigBird",
}

CHECKPOINT_DIR_ENV = "BEPATH_WORKER_CHECKPOINT_DIR"

# conventional fine-tuning settings; echoed in trained metadata
WEIGHT_DECAY = 0.01
WARMUP_FRACTION = 0.1
PREDICT_BATCH = 8


def _require(request: dict, field: str, types, check=None):
    value = request.get(field)
    if not isinstance(value, types) or isinstance(value, bool):
        raise BadRequest(f"field {field!r} must be {types} (got {type(value).__name__})")
    if check is not None and not check(value):
        raise BadRequest(f"field {field!r} has invalid value {value!r}")
    return value


def _text_rows(request: dict, field: str, *, labeled: bool, num_labels: int = 0) -> list[dict]:
    rows = request.get(field)
    if not isinstance(rows, list):
        raise BadRequest(f"field {field!r} must be a list")
    for row in rows:
        if not isinstance(row, dict) or not isinstance(row.get("id"), str) \
                or not isinstance(row.get("text"), str):
            raise BadRequest(f"rows in {field!r} need string 'id' and 'text'")
        if labeled:
            label = row.get("label")
            if not isinstance(label, int) or isinstance(label, bool):
                raise BadRequest(f"rows in {field!r} need an integer 'label'")
            if not 0 <= label < num_labels:
                raise BadRequest(f"label {label} outside [0, {num_labels})")
    return rows


def _seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)


def _checkpoint_id(request: dict) -> str:
    # stable across reruns: derived from everything that shapes the weights
    relevant = {k: request[k] for k in sorted(request) if k not in ("kind", "eval")}
    digest = hashlib.sha256(json.dumps(relevant, sort_keys=True).encode()).hexdigest()
    return f"{request.get('model_name', 'model')}-{digest[:12]}"


def _prob_rows(model, tokenizer, rows, max_length: int) -> list[dict]:
    model.eval()
    out = []
    with torch.no_grad():
        for start in range(0, len(rows), PREDICT_BATCH):
            chunk = rows[start:start + PREDICT_BATCH]
            enc = tokenizer(
                [r["text"] for r in chunk],
                padding=True,
                truncation=True,
                max_length=max_length,
                return_tensors="pt",
            )
            probs = torch.softmax(model(**enc).logits, dim=-1)
            probs = probs / probs.sum(dim=-1, keepdim=True)
            for row, p in zip(chunk, probs):
                out.append({"id": row["id"], "probs": [float(v) for v in p]})
    return out


class Engine:
    def __init__(self, model_map=None, checkpoint_dir=None):
        self.model_map = dict(DEFAULT_MODEL_MAP if model_map is None else model_map)
        root = checkpoint_dir or os.environ.get(CHECKPOINT_DIR_ENV)
        if root is None:
            root = tempfile.mkdtemp(prefix="trainer-worker-")
            log.info("%s not set; checkpoints go to %s", CHECKPOINT_DIR_ENV, root)
        self.checkpoint_dir = Path(root)
        self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
        torch.set_num_threads(1)  # keeps fixed-seed reruns comparable

    def _load(self, source: str, num_labels=None):
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        kwargs = {} if num_labels is None else {"num_labels": num_labels}
        try:
            tokenizer = AutoTokenizer.from_pretrained(source)
            model = AutoModelForSequenceClassification.from_pretrained(source, **kwargs)
        except (OSError, ValueError, RuntimeError, KeyError) as exc:
            raise ModelUnavailable(f"cannot load checkpoint {source!r}: {exc}") from exc
        return tokenizer, model

    def _max_length(self, model, max_tokens: int) -> int:
        limit = getattr(model.config, "max_position_embeddings", max_tokens)
        return max(8, min(max_tokens, limit))

    def train(self, request: dict, on_progress):
        _require(request, "trial_id", str)
        model_name = _require(request, "model_name", str)
        num_labels = _require(request, "num_labels", int, lambda v: v >= 2)
        max_tokens = _require(request, "max_tokens", int, lambda v: v >= 1)
        learning_rate = _require(request, "learning_rate", (int, float), lambda v: v > 0)
        seed = _require(request, "seed", int)
        batch_size = _require(request, "batch_size", int, lambda v: v >= 1)
        epochs = _require(request, "epochs", int, lambda v: v >= 1)
        train_rows = _text_rows(request, "train", labeled=True, num_labels=num_labels)
        if not train_rows:
            raise BadRequest("empty training set")
        eval_rows = _text_rows(request, "eval", labeled=False) if "eval" in request else []

        source = self.model_map.get(model_name)
        if source is None:
            raise ModelUnavailable(f"no model named {model_name!r} (have {sorted(self.model_map)})")

        _seed_everything(seed)  # before load: the fresh head draws from the global RNG
        tokenizer, model = self._load(source, num_labels)
        max_length = self._max_length(model, max_tokens)

        texts = [r["text"] for r in train_rows]
        labels = [r["label"] for r in train_rows]
        steps_per_epoch = math.ceil(len(texts) / batch_size)
        total_steps = epochs * steps_per_epoch
        warmup = max(1, int(total_steps * WARMUP_FRACTION))

        optimizer = torch.optim.AdamW(
            model.parameters(), lr=learning_rate, weight_decay=WEIGHT_DECAY
        )

        def schedule(step: int) -> float:
            if step < warmup:
                return step / warmup
            return max(0.0, (total_steps - step) / max(1, total_steps - warmup))

        scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, schedule)

        order = list(range(len(texts)))
        shuffler = random.Random(seed)
        model.train()
        try:
            for epoch in range(epochs):
                shuffler.shuffle(order)
                losses = []
                for start in range(0, len(order), batch_size):
                    batch = order[start:start + batch_size]
                    enc = tokenizer(
                        [texts[i] for i in batch],
                        padding=True,
                        truncation=True,
                        max_length=max_length,
                        return_tensors="pt",
                    )
                    out = model(**enc, labels=torch.tensor([labels[i] for i in batch]))
                    out.loss.backward()
                    optimizer.step()
                    scheduler.step()
                    optimizer.zero_grad()
                    losses.append(float(out.loss.detach()))
                on_progress(epoch, sum(losses) / len(losses))
        except torch.cuda.OutOfMemoryError as exc:
            raise OutOfMemory(str(exc)) from exc
        except RuntimeError as exc:
            if "out of memory" in str(exc).lower():
                raise OutOfMemory(str(exc)) from exc
            raise

        checkpoint_id = _checkpoint_id(request)
        target = self.checkpoint_dir / checkpoint_id
        model.save_pretrained(target)
        tokenizer.save_pretrained(target)
        log.info("trial %s saved checkpoint %s", request["trial_id"], checkpoint_id)

        metadata = {
            "optimizer": "adamw",
            "weight_decay": WEIGHT_DECAY,
            "warmup_fraction": WARMUP_FRACTION,
            "max_length": max_length,
            "device": "cpu",
            "torch_threads": torch.get_num_threads(),
        }
        return checkpoint_id, _prob_rows(model, tokenizer, eval_rows, max_length), metadata

    def predict(self, request: dict):
        checkpoint_id = _require(request, "checkpoint_id", str)
        rows = _text_rows(request, "reports", labeled=False)
        target = self.checkpoint_dir / checkpoint_id
        if not target.is_dir():
            raise BadRequest(f"unknown checkpoint_id {checkpoint_id!r}")
        tokenizer, model = self._load(str(target))
        max_length = self._max_length(model, getattr(model.config, "max_position_embeddings", 512))
        return _prob_rows(model, tokenizer, rows, max_length)
