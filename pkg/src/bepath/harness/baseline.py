"""Deterministic baseline classifier: hashed bag-of-words + softmax regression.

Features are signed-hashed unigram+bigram counts in a 2^18-dimensional
space by default, rare-collision at corpus scale while bounding memory.
Raw counts, not normalized rows: the larger gradients they produce let
full-batch descent reach a usable optimum within the default epoch
budget. Training runs gradient descent on the cross-entropy from
zero-initialized weights, so identical data and config always give
identical models, with no dependence on thread scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .. import _kernels
from ..tokenization import TokenizerSpec, tokenize

DEFAULT_FEATURE_DIM = 2 ** 18


class NumericalOverflow(ArithmeticError):
    """Training diverged (non-finite loss), typically a too-large step size."""


def featurize(texts: list[str], spec: TokenizerSpec, n_features: int) -> sp.csr_matrix:
    """Hashed unigram+bigram counts per text, one row per text."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for text in texts:
        counts = _kernels.hashed_ngram_counts(tokenize(text, spec), n_features)
        for idx in sorted(counts):
            if counts[idx] == 0.0:
                continue
            indices.append(idx)
            data.append(counts[idx])
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(texts), n_features),
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    x: sp.csr_matrix,
    y: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy and its analytic gradients.

    y holds integer class labels; gradients are with respect to weights
    (n_features x k) and bias (k,).
    """
    n = x.shape[0]
    logits = x @ weights + bias
    probs = softmax(logits)
    eps = 1e-12
    loss = -float(np.mean(np.log(probs[np.arange(n), y] + eps)))
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad_w = (x.T @ delta).astype(np.float64)
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


@dataclass
class BaselineModel:
    weights: np.ndarray  # n_features x k
    bias: np.ndarray  # k
    n_features: int
    n_classes: int
    losses: list[float]

    def predict_proba(self, x: sp.csr_matrix) -> np.ndarray:
        return softmax(x @ self.weights + self.bias)

    def save(self, path) -> None:
        w = sp.csr_matrix(self.weights)
        np.savez_compressed(
            path,
            w_data=w.data,
            w_indices=w.indices,
            w_indptr=w.indptr,
            bias=self.bias,
            shape=np.array([self.n_features, self.n_classes], dtype=np.int64),
            losses=np.asarray(self.losses),
        )

    @classmethod
    def load(cls, path) -> "BaselineModel":
        with np.load(path) as blob:
            n_features, n_classes = (int(v) for v in blob["shape"])
            weights = sp.csr_matrix(
                (blob["w_data"], blob["w_indices"], blob["w_indptr"]),
                shape=(n_features, n_classes),
            ).toarray()
            return cls(
                weights=weights,
                bias=blob["bias"],
                n_features=n_features,
                n_classes=n_classes,
                losses=list(blob["losses"]),
            )


def train(
    x: sp.csr_matrix,
    y: np.ndarray,
    n_classes: int,
    learning_rate: float,
    epochs: int,
) -> BaselineModel:
    """Full-batch gradient descent from zero weights."""
    if x.shape[0] == 0:
        raise ValueError("empty training set")
    n_features = x.shape[1]
    weights = np.zeros((n_features, n_classes))
    bias = np.zeros(n_classes)
    losses = []
    for _ in range(epochs):
        loss, grad_w, grad_b = loss_and_grad(weights, bias, x, y)
        if not np.isfinite(loss):
            raise NumericalOverflow(f"training loss became {loss}")
        losses.append(loss)
        weights -= learning_rate * grad_w
        bias -= learning_rate * grad_b
    return BaselineModel(
        weights=weights, bias=bias, n_features=n_features, n_classes=n_classes, losses=losses
    )
