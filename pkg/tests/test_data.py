"""Data pipeline checks: binary round-trips, malformed rejection,
deterministic splits and batching, blob separability."""

import numpy as np
import pytest

from telulab.data import (
    Dataset,
    DataMeta,
    SplitSpec,
    batch_iter,
    load_cifar10,
    load_cifar100,
    split,
    synthetic_blobs,
    write_cifar10,
    write_cifar100,
)
from telulab.errors import ConfigError, FormatError


def make_cifar10_fixture(tmp_path, labels, fill):
    """Build a small CIFAR-10 binary file with constant-filled images."""
    n = len(labels)
    records = np.empty((n, 3073), dtype=np.uint8)
    records[:, 0] = labels
    for i, value in enumerate(fill):
        records[i, 1:] = value
    path = tmp_path / "fixture.bin"
    path.write_bytes(records.tobytes())
    return path


class TestCifar10:
    def test_two_record_fixture(self, tmp_path):
        path = make_cifar10_fixture(tmp_path, labels=[3, 7], fill=[255, 0])
        ds = load_cifar10(path)
        assert len(ds) == 2
        assert ds.images.shape == (2, 3, 32, 32)
        np.testing.assert_array_equal(ds.labels, [3, 7])
        assert np.all(ds.images[0] == 1.0)
        assert np.all(ds.images[1] == 0.0)

    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        records = np.empty((5, 3073), dtype=np.uint8)
        records[:, 0] = rng.integers(0, 10, size=5)
        records[:, 1:] = rng.integers(0, 256, size=(5, 3072))
        src = tmp_path / "src.bin"
        src.write_bytes(records.tobytes())

        ds = load_cifar10(src)
        dst = tmp_path / "dst.bin"
        write_cifar10(ds, dst)
        assert src.read_bytes() == dst.read_bytes()

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(bytes(3072))
        with pytest.raises(FormatError):
            load_cifar10(path)

    def test_label_out_of_range_rejected(self, tmp_path):
        path = make_cifar10_fixture(tmp_path, labels=[10], fill=[0])
        with pytest.raises(FormatError):
            load_cifar10(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.bin"
        path.write_bytes(b"")
        with pytest.raises(FormatError):
            load_cifar10(path)

    def test_directory_layout(self, tmp_path):
        for name in [f"data_batch_{i}.bin" for i in range(1, 6)]:
            records = np.zeros((2, 3073), dtype=np.uint8)
            records[:, 0] = [1, 2]
            (tmp_path / name).write_bytes(records.tobytes())
        ds = load_cifar10(tmp_path)
        assert len(ds) == 10

    def test_missing_batch_file_reported(self, tmp_path):
        with pytest.raises(FormatError, match="data_batch_1.bin"):
            load_cifar10(tmp_path)

    def test_pixel_range(self, tmp_path):
        path = make_cifar10_fixture(tmp_path, labels=[0, 1, 2], fill=[0, 128, 255])
        ds = load_cifar10(path)
        assert ds.images.min() >= 0.0
        assert ds.images.max() <= 1.0


class TestCifar100:
    def make_fixture(self, tmp_path, fine_labels):
        n = len(fine_labels)
        records = np.zeros((n, 3074), dtype=np.uint8)
        records[:, 0] = 0  # coarse label, unused
        records[:, 1] = fine_labels
        path = tmp_path / "train.bin"
        path.write_bytes(records.tobytes())
        return path

    def test_fine_label_boundary(self, tmp_path):
        ds = load_cifar100(self.make_fixture(tmp_path, [99, 0]))
        np.testing.assert_array_equal(ds.labels, [99, 0])
        assert ds.meta.num_classes == 100

    def test_fine_label_overflow_rejected(self, tmp_path):
        with pytest.raises(FormatError):
            load_cifar100(self.make_fixture(tmp_path, [100]))

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        records = np.empty((4, 3074), dtype=np.uint8)
        records[:, 0] = 0
        records[:, 1] = rng.integers(0, 100, size=4)
        records[:, 2:] = rng.integers(0, 256, size=(4, 3072))
        src = tmp_path / "src.bin"
        src.write_bytes(records.tobytes())
        ds = load_cifar100(src)
        dst = tmp_path / "dst.bin"
        write_cifar100(ds, dst)
        assert src.read_bytes() == dst.read_bytes()


def blob_ds(n=100, classes=4, dim=8, spread=0.05, seed=7):
    return synthetic_blobs(n, classes, dim, spread, seed)


class TestSplit:
    def test_sizes_disjoint_exhaustive(self):
        ds = blob_ds(n=50)
        train, valid = split(ds, SplitSpec(train=40, valid=10, seed=0))
        assert len(train) == 40 and len(valid) == 10
        key = lambda d: {tuple(np.round(row, 9)) for row in d.images}
        assert key(train) | key(valid) == key(ds)
        assert not (key(train) & key(valid))

    def test_deterministic(self):
        ds = blob_ds(n=50)
        a = split(ds, SplitSpec(train=40, valid=10, seed=0))
        b = split(ds, SplitSpec(train=40, valid=10, seed=0))
        np.testing.assert_array_equal(a[0].images, b[0].images)
        np.testing.assert_array_equal(a[1].labels, b[1].labels)

    def test_seed_changes_assignment(self):
        ds = blob_ds(n=50)
        a, _ = split(ds, SplitSpec(train=40, valid=10, seed=0))
        b, _ = split(ds, SplitSpec(train=40, valid=10, seed=1))
        assert not np.array_equal(a.images, b.images)

    def test_inconsistent_counts_rejected(self):
        ds = blob_ds(n=50)
        with pytest.raises(ConfigError):
            split(ds, SplitSpec(train=30, valid=10, seed=0))


class TestBlobs:
    def test_balanced_labels(self):
        ds = synthetic_blobs(10, classes=10, dim=10, spread=0.1, seed=0)
        assert sorted(ds.labels.tolist()) == list(range(10))

    def test_deterministic_bitwise(self):
        a = blob_ds()
        b = blob_ds()
        np.testing.assert_array_equal(a.images, b.images)

    def test_separability_margin(self):
        # inter-mean distance over spread must be large enough to learn
        ds = synthetic_blobs(100, classes=2, dim=2, spread=0.05, seed=7)
        mu0 = ds.images[ds.labels == 0].mean(axis=0)
        mu1 = ds.images[ds.labels == 1].mean(axis=0)
        assert np.linalg.norm(mu0 - mu1) / 0.05 > 6.0

    def test_unit_radius_means(self):
        ds = synthetic_blobs(4000, classes=5, dim=8, spread=0.01, seed=3)
        for c in range(5):
            mu = ds.images[ds.labels == c].mean(axis=0)
            assert np.linalg.norm(mu) == pytest.approx(1.0, abs=0.01)

    def test_dim_too_small_rejected(self):
        with pytest.raises(ConfigError):
            synthetic_blobs(10, classes=4, dim=3)

    def test_train_and_test_streams_differ(self):
        a = synthetic_blobs(20, 2, 4, 0.1, seed=0, tag="train")
        b = synthetic_blobs(20, 2, 4, 0.1, seed=0, tag="test")
        assert not np.array_equal(a.images, b.images)


class TestBatchIter:
    def test_short_final_batch(self):
        ds = blob_ds(n=300, classes=4)
        sizes = [len(lbl) for _, lbl in batch_iter(ds, 128)]
        assert sizes == [128, 128, 44]

    def test_unshuffled_order(self):
        ds = blob_ds(n=20)
        images, labels = next(batch_iter(ds, 8))
        np.testing.assert_array_equal(images, ds.images[:8])
        np.testing.assert_array_equal(labels, ds.labels[:8])

    def test_shuffled_stream_reproducible(self):
        ds = blob_ds(n=64)
        a = list(batch_iter(ds, 16, shuffle=True, seed=3, epoch=5))
        b = list(batch_iter(ds, 16, shuffle=True, seed=3, epoch=5))
        for (xa, ya), (xb, yb) in zip(a, b):
            np.testing.assert_array_equal(xa, xb)
            np.testing.assert_array_equal(ya, yb)

    def test_epoch_changes_order(self):
        ds = blob_ds(n=64)
        a = np.concatenate([y for _, y in batch_iter(ds, 16, True, seed=3, epoch=0)])
        b = np.concatenate([y for _, y in batch_iter(ds, 16, True, seed=3, epoch=1)])
        assert not np.array_equal(a, b)

    def test_concatenation_is_permutation(self):
        ds = blob_ds(n=50, classes=5)
        ys = np.concatenate([y for _, y in batch_iter(ds, 7, True, seed=1, epoch=2)])
        assert sorted(ys.tolist()) == sorted(ds.labels.tolist())

    def test_bad_batch_size(self):
        with pytest.raises(ConfigError):
            next(batch_iter(blob_ds(), 0))


class TestDatasetInvariants:
    def test_length_mismatch_rejected(self):
        with pytest.raises(FormatError):
            Dataset(np.zeros((3, 2)), np.zeros(2, dtype=int), DataMeta("x", 2, "t"))

    def test_empty_rejected(self):
        with pytest.raises(FormatError):
            Dataset(np.zeros((0, 2)), np.zeros(0, dtype=int), DataMeta("x", 2, "t"))
