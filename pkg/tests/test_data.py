import gzip
import struct

import numpy as np
import pytest

from leofl.data import (
    Dataset,
    IngestionError,
    load_mnist,
    partition,
    synthetic_dataset,
)


def write_idx_images(path, images: np.ndarray, compress=False):
    n, rows, cols = images.shape
    blob = struct.pack(">iiii", 2051, n, rows, cols) + images.astype(np.uint8).tobytes()
    opener = gzip.open if compress else open
    with opener(path, "wb") as f:
        f.write(blob)


def write_idx_labels(path, labels: np.ndarray, compress=False):
    blob = struct.pack(">ii", 2049, len(labels)) + labels.astype(np.uint8).tobytes()
    opener = gzip.open if compress else open
    with opener(path, "wb") as f:
        f.write(blob)


@pytest.fixture
def idx_pair(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, size=(6, 28, 28)).astype(np.uint8)
    labels = np.array([0, 1, 2, 3, 4, 5], dtype=np.uint8)
    img_path = tmp_path / "train-images-idx3-ubyte"
    lbl_path = tmp_path / "train-labels-idx1-ubyte"
    write_idx_images(img_path, images)
    write_idx_labels(lbl_path, labels)
    return img_path, lbl_path, images, labels


class TestMnistIngestion:
    def test_round_trip(self, idx_pair):
        img_path, lbl_path, images, labels = idx_pair
        ds = load_mnist(img_path, lbl_path)
        assert ds.features.shape == (6, 784)
        assert ds.features.max() <= 1.0 and ds.features.min() >= 0.0
        np.testing.assert_allclose(ds.features[0], images[0].ravel() / 255.0)
        np.testing.assert_array_equal(ds.labels, labels)

    def test_gzip_round_trip(self, tmp_path):
        images = np.zeros((3, 4, 4), dtype=np.uint8)
        labels = np.array([7, 8, 9], dtype=np.uint8)
        img_path = tmp_path / "imgs.gz"
        lbl_path = tmp_path / "lbls.gz"
        write_idx_images(img_path, images, compress=True)
        write_idx_labels(lbl_path, labels, compress=True)
        ds = load_mnist(img_path, lbl_path)
        assert len(ds) == 3
        np.testing.assert_array_equal(ds.labels, labels)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad"
        path.write_bytes(struct.pack(">ii", 1234, 0))
        with pytest.raises(IngestionError):
            load_mnist(path, path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError, match="not found"):
            load_mnist(tmp_path / "nope", tmp_path / "nope2")

    def test_count_mismatch(self, tmp_path, idx_pair):
        img_path, _, _, _ = idx_pair
        lbl_path = tmp_path / "short-labels"
        write_idx_labels(lbl_path, np.array([1, 2], dtype=np.uint8))
        with pytest.raises(IngestionError, match="counts differ"):
            load_mnist(img_path, lbl_path)


class TestSynthetic:
    def test_shape_contract(self):
        ds = synthetic_dataset(100, seed=0)
        assert ds.features.shape == (100, 784)
        assert ds.features.min() >= 0.0 and ds.features.max() <= 1.0
        assert set(np.unique(ds.labels)) <= set(range(10))

    def test_deterministic(self):
        a = synthetic_dataset(50, seed=3)
        b = synthetic_dataset(50, seed=3)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_shared_blobs_across_splits(self):
        # different sample seeds, same class geometry: a model trained on one
        # split should transfer to the other
        from leofl import learn

        train = synthetic_dataset(500, seed=0, blob_seed=9)
        test = synthetic_dataset(200, seed=1, blob_seed=9)
        hp = learn.HyperParams(learning_rate=0.1, local_epochs=3)
        w = learn.sat_learn_proc(
            learn.init_weights(784, 10), train, hp, np.random.default_rng(0)
        )
        assert learn.evaluate(w, test) > 0.5


class TestPartition:
    def test_single_shard(self):
        ds = synthetic_dataset(20, seed=0)
        (shard,) = partition(ds, 1, seed=0)
        assert len(shard) == 20

    def test_even_split_sizes(self):
        ds = synthetic_dataset(1000, seed=0, feature_dim=8)
        shards = partition(ds, 40, seed=1)
        assert all(len(s) == 25 for s in shards)

    def test_near_even_split(self):
        ds = synthetic_dataset(103, seed=0, feature_dim=8)
        sizes = [len(s) for s in partition(ds, 10, seed=1)]
        assert sum(sizes) == 103
        assert max(sizes) - min(sizes) <= 1

    def test_union_is_original_multiset(self):
        ds = synthetic_dataset(60, seed=0, feature_dim=4)
        shards = partition(ds, 7, seed=2)
        rebuilt = np.concatenate([s.features for s in shards])
        assert sorted(map(tuple, rebuilt)) == sorted(map(tuple, ds.features))

    def test_deterministic(self):
        ds = synthetic_dataset(60, seed=0, feature_dim=4)
        a = partition(ds, 5, seed=3)
        b = partition(ds, 5, seed=3)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.features, y.features)

    def test_too_many_shards(self):
        with pytest.raises(ValueError):
            partition(synthetic_dataset(5, seed=0, feature_dim=4), 6, seed=0)
