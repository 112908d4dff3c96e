"""Multinomial logistic regression, local mini-batch SGD, and the global update.

The model is a flat weight vector of length num_classes * (feature_dim + 1);
the bias is an appended constant feature. For MNIST this gives 10 * 785 = 7850
trainable parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset


@dataclass(frozen=True)
class HyperParams:
    learning_rate: float = 0.1
    local_epochs: int = 1
    batch_size: int = 32
    rounds: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning rate must be non-negative")
        if min(self.local_epochs, self.batch_size, self.rounds) < 1:
            raise ValueError("epochs, batch size, and rounds must be positive")


def model_dim(feature_dim: int, num_classes: int) -> int:
    return num_classes * (feature_dim + 1)


def init_weights(feature_dim: int, num_classes: int) -> np.ndarray:
    return np.zeros(model_dim(feature_dim, num_classes))


def _as_matrix(w: np.ndarray, feature_dim: int) -> np.ndarray:
    return w.reshape(-1, feature_dim + 1)


def _augment(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    return np.hstack([x, np.ones((len(x), 1))])


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def predict_proba(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    logits = _augment(x) @ _as_matrix(w, np.atleast_2d(x).shape[1]).T
    return np.exp(_log_softmax(logits))


def per_sample_loss(w: np.ndarray, x: np.ndarray, label: int) -> float:
    """Cross-entropy -log softmax(Wx + b)[label] for one sample."""
    logits = _augment(x) @ _as_matrix(w, np.atleast_2d(x).shape[1]).T
    return float(-_log_softmax(logits)[0, label])


def local_loss(w: np.ndarray, dataset: Dataset) -> float:
    """Mean cross-entropy over one satellite's shard."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    logits = _augment(dataset.features) @ _as_matrix(w, dataset.features.shape[1]).T
    logp = _log_softmax(logits)
    return float(-logp[np.arange(len(dataset)), dataset.labels].mean())


def loss_gradient_sum(w: np.ndarray, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of the summed (not averaged) cross-entropy over the given samples."""
    xa = _augment(features)
    logits = xa @ _as_matrix(w, features.shape[1]).T
    probs = np.exp(_log_softmax(logits))
    probs[np.arange(len(labels)), labels] -= 1.0
    return (probs.T @ xa).ravel()


def sat_learn_proc(
    w_global: np.ndarray,
    dataset: Dataset,
    hp: HyperParams,
    rng: np.random.Generator,
) -> np.ndarray:
    """Local epochs of mini-batch SGD starting from the global weights."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    w = w_global.copy()
    n = len(dataset)
    for _ in range(hp.local_epochs):
        perm = rng.permutation(n)
        for start in range(0, n, hp.batch_size):
            batch = perm[start : start + hp.batch_size]
            grad = loss_gradient_sum(w, dataset.features[batch], dataset.labels[batch])
            w -= (hp.learning_rate / len(batch)) * grad
    return w


def gradient(w_local: np.ndarray, w_global: np.ndarray) -> np.ndarray:
    """The update a satellite reports: local weights minus the global weights."""
    if w_local.shape != w_global.shape:
        raise ValueError("weight dims differ")
    return w_local - w_global


def global_update(w_global: np.ndarray, aggregate: np.ndarray, total_data: float) -> np.ndarray:
    """FedAvg step: add the data-size-weighted gradient sum divided by total size."""
    if total_data <= 0:
        raise ValueError("total data size must be positive")
    return w_global + aggregate / total_data


def evaluate(w: np.ndarray, test_set: Dataset) -> float:
    """Top-1 accuracy; argmax ties resolve to the lowest class index."""
    if len(test_set) == 0:
        raise ValueError("test set is empty")
    logits = _augment(test_set.features) @ _as_matrix(w, test_set.features.shape[1]).T
    return float((logits.argmax(axis=1) == test_set.labels).mean())
