"""Datasets: MNIST IDX ingestion, a synthetic fallback, and even partitioning."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049


class IngestionError(RuntimeError):
    """Raised when dataset files are missing or malformed."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n, feature_dim), floats in [0, 1]
    labels: np.ndarray  # (n,), ints in [0, num_classes)

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise ValueError("feature/label counts differ")

    def __len__(self) -> int:
        return len(self.labels)


def _open_maybe_gzip(path: Path):
    with open(path, "rb") as f:
        magic = f.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_idx(path: Path, expected_magic: int) -> np.ndarray:
    if not path.exists():
        raise IngestionError(
            f"dataset file not found: {path}; download the MNIST IDX files or "
            "switch the config to the synthetic dataset"
        )
    with _open_maybe_gzip(path) as f:
        magic, = struct.unpack(">i", f.read(4))
        if magic != expected_magic:
            raise IngestionError(f"{path}: bad IDX magic {magic}, expected {expected_magic}")
        ndim = magic % 256
        dims = struct.unpack(f">{ndim}i", f.read(4 * ndim))
        data = np.frombuffer(f.read(int(np.prod(dims))), dtype=np.uint8)
    if len(data) != int(np.prod(dims)):
        raise IngestionError(f"{path}: truncated IDX payload")
    return data.reshape(dims)


def load_mnist(images_path: str | Path, labels_path: str | Path) -> Dataset:
    """Read an MNIST-format IDX image/label pair, scaling pixels to [0, 1]."""
    images = _read_idx(Path(images_path), IDX_IMAGES_MAGIC)
    labels = _read_idx(Path(labels_path), IDX_LABELS_MAGIC)
    if len(images) != len(labels):
        raise IngestionError("image and label counts differ")
    feats = images.reshape(len(images), -1).astype(np.float64) / 255.0
    return Dataset(feats, labels.astype(np.int64))


def synthetic_dataset(
    num_samples: int,
    seed: int,
    feature_dim: int = 784,
    num_classes: int = 10,
    noise_std: float = 0.35,
    blob_seed: int = 0,
) -> Dataset:
    """Seeded Gaussian-blob stand-in with the same shape contract as MNIST.

    `blob_seed` fixes the class geometry so train and test splits drawn with
    different sample seeds come from the same distribution.
    """
    rng = np.random.default_rng(seed)
    means = np.random.default_rng(blob_seed).uniform(0.25, 0.75, size=(num_classes, feature_dim))
    labels = rng.integers(0, num_classes, size=num_samples)
    feats = means[labels] + rng.normal(0.0, noise_std, size=(num_samples, feature_dim))
    feats = np.clip(feats, 0.0, 1.0)
    return Dataset(feats, labels.astype(np.int64))


def partition(dataset: Dataset, k: int, seed: int) -> list[Dataset]:
    """Split into k disjoint shards of near-equal size, deterministically."""
    if k < 1:
        raise ValueError("need at least one shard")
    n = len(dataset)
    if k > n:
        raise ValueError(f"cannot split {n} samples into {k} shards")
    perm = np.random.default_rng(seed).permutation(n)
    return [
        Dataset(dataset.features[chunk], dataset.labels[chunk])
        for chunk in np.array_split(perm, k)
    ]
