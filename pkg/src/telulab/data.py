"""Dataset ingestion and batching.

Bit-exact readers for the CIFAR-10/100 binary formats, a deterministic
train/validation split, a synthetic Gaussian-blob generator for fast
tests, and seeded batch iteration.  Pixel bytes are scaled by 1/255 into
[0, 1]; no standardization or augmentation is applied (a loader writes
what is on disk, nothing more).

CIFAR-10 records are 3073 bytes: one label byte (0..9) then 3072 pixel
bytes as three 1024-byte channel planes (R, G, B), each plane row-major
32x32.  CIFAR-100 records are 3074 bytes: coarse label byte, fine label
byte (0..99, the one used), then the same 3072 pixel bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, Union

import numpy as np

from .errors import ConfigError, FormatError
from .rng import TAG_BATCH, TAG_BLOBS, TAG_SPLIT, generator

__all__ = [
    "DataMeta",
    "Dataset",
    "SplitSpec",
    "load_cifar10",
    "load_cifar100",
    "write_cifar10",
    "write_cifar100",
    "split",
    "synthetic_blobs",
    "batch_iter",
]

_CIFAR10_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
_CIFAR10_TEST_FILES = ("test_batch.bin",)
_CIFAR100_TRAIN_FILES = ("train.bin",)
_CIFAR100_TEST_FILES = ("test.bin",)


@dataclass(frozen=True)
class DataMeta:
    name: str
    num_classes: int
    split_tag: str


@dataclass(frozen=True)
class Dataset:
    """Features plus integer labels; immutable after load.

    ``images`` is (N, 3, 32, 32) for CIFAR and (N, dim) for synthetic
    blobs; values are float64, CIFAR pixels scaled into [0, 1].
    """

    images: np.ndarray
    labels: np.ndarray
    meta: DataMeta

    def __post_init__(self) -> None:
        if len(self.images) != len(self.labels):
            raise FormatError("images and labels must have equal length")
        if len(self.images) == 0:
            raise FormatError("dataset must be non-empty")

    def __len__(self) -> int:
        return len(self.labels)

    def take(self, indices: np.ndarray, split_tag: str) -> "Dataset":
        return Dataset(
            images=self.images[indices],
            labels=self.labels[indices],
            meta=replace(self.meta, split_tag=split_tag),
        )


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic train/validation carve-up of a source training set."""

    train: int
    valid: int
    seed: int
    test: int = 0

    def __post_init__(self) -> None:
        if self.train <= 0 or self.valid <= 0:
            raise ConfigError("split.train and split.valid must be positive")
        if self.test < 0:
            raise ConfigError("split.test must be non-negative")


def _read_records(
    path: Path, record_len: int, label_index: int, num_classes: int
) -> tuple[np.ndarray, np.ndarray]:
    raw = np.frombuffer(path.read_bytes(), dtype=np.uint8)
    if raw.size == 0 or raw.size % record_len:
        raise FormatError(
            f"{path.name}: length {raw.size} is not a positive multiple of "
            f"{record_len}"
        )
    records = raw.reshape(-1, record_len)
    labels = records[:, label_index].astype(np.int64)
    if labels.max() >= num_classes:
        raise FormatError(
            f"{path.name}: label {labels.max()} out of range [0, {num_classes})"
        )
    pixels = records[:, record_len - 3072 :]
    images = pixels.reshape(-1, 3, 32, 32).astype(np.float64) / 255.0
    return images, labels


def _gather(
    path: Union[str, Path],
    filenames: tuple[str, ...],
    record_len: int,
    label_index: int,
    num_classes: int,
    name: str,
    split_tag: str,
) -> Dataset:
    path = Path(path)
    if path.is_file():
        files = [path]
    else:
        files = [path / f for f in filenames]
        missing = [f.name for f in files if not f.is_file()]
        if missing:
            raise FormatError(f"{path}: missing {', '.join(missing)}")
    parts = [_read_records(f, record_len, label_index, num_classes) for f in files]
    images = np.concatenate([p[0] for p in parts])
    labels = np.concatenate([p[1] for p in parts])
    return Dataset(images, labels, DataMeta(name, num_classes, split_tag))


def load_cifar10(path: Union[str, Path], split_tag: str = "train") -> Dataset:
    """Read CIFAR-10 binaries; ``path`` may be the archive directory or a
    single .bin file.  Record order is preserved exactly as on disk."""
    if split_tag not in ("train", "test"):
        raise ConfigError("split_tag must be 'train' or 'test'")
    files = _CIFAR10_TRAIN_FILES if split_tag == "train" else _CIFAR10_TEST_FILES
    return _gather(path, files, 3073, 0, 10, "cifar10", split_tag)


def load_cifar100(path: Union[str, Path], split_tag: str = "train") -> Dataset:
    """Read CIFAR-100 binaries (fine labels); layout rules as for CIFAR-10."""
    if split_tag not in ("train", "test"):
        raise ConfigError("split_tag must be 'train' or 'test'")
    files = _CIFAR100_TRAIN_FILES if split_tag == "train" else _CIFAR100_TEST_FILES
    return _gather(path, files, 3074, 1, 100, "cifar100", split_tag)


def _pixels_to_bytes(images: np.ndarray) -> np.ndarray:
    return np.rint(images * 255.0).astype(np.uint8).reshape(len(images), 3072)


def write_cifar10(ds: Dataset, path: Union[str, Path]) -> None:
    """Write a dataset back to the CIFAR-10 binary record format."""
    records = np.empty((len(ds), 3073), dtype=np.uint8)
    records[:, 0] = ds.labels
    records[:, 1:] = _pixels_to_bytes(ds.images)
    Path(path).write_bytes(records.tobytes())


def write_cifar100(ds: Dataset, path: Union[str, Path], coarse=None) -> None:
    """Write a dataset back to the CIFAR-100 binary record format."""
    records = np.empty((len(ds), 3074), dtype=np.uint8)
    records[:, 0] = 0 if coarse is None else coarse
    records[:, 1] = ds.labels
    records[:, 2:] = _pixels_to_bytes(ds.images)
    Path(path).write_bytes(records.tobytes())


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Shuffle deterministically by ``spec.seed`` and carve (train, valid).

    The split is unstratified; the same (dataset size, seed) always yields
    the same index assignment.
    """
    if spec.train + spec.valid != len(ds):
        raise ConfigError(
            f"split sizes {spec.train}+{spec.valid} != dataset size {len(ds)}"
        )
    perm = generator(spec.seed, TAG_SPLIT).permutation(len(ds))
    train_idx = perm[: spec.train]
    valid_idx = perm[spec.train : spec.train + spec.valid]
    return ds.take(train_idx, "train"), ds.take(valid_idx, "valid")


def _simplex_means(classes: int, dim: int) -> np.ndarray:
    # vertices of a regular simplex, embedded in the first `classes`
    # coordinates and scaled to unit radius
    if dim < classes:
        raise ConfigError(f"blobs need dim >= classes, got dim={dim} < {classes}")
    verts = np.eye(classes) - 1.0 / classes
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    means = np.zeros((classes, dim))
    means[:, :classes] = verts
    return means


def synthetic_blobs(
    n: int, classes: int, dim: int, spread: float = 0.1, seed: int = 0, tag: str = "train"
) -> Dataset:
    """Gaussian blobs around unit-radius simplex vertices, labels balanced
    to within one sample.  Fully determined by the arguments."""
    if classes < 2:
        raise ConfigError("blobs need at least 2 classes")
    if n < classes:
        raise ConfigError("blobs need at least one sample per class")
    if spread <= 0:
        raise ConfigError("blobs spread must be positive")
    means = _simplex_means(classes, dim)
    labels = np.arange(n, dtype=np.int64) % classes
    extra = 0 if tag == "train" else 1
    noise = generator(seed, TAG_BLOBS, extra).standard_normal((n, dim))
    images = means[labels] + spread * noise
    return Dataset(images, labels, DataMeta("blobs", classes, tag))


def batch_iter(
    ds: Dataset,
    batch: int,
    shuffle: bool = False,
    seed: int = 0,
    epoch: int = 0,
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (images, labels) batches; the final short batch is included.

    With ``shuffle`` the order is a pure function of (seed, epoch), so an
    epoch's batch stream can be replayed exactly.
    """
    if batch < 1:
        raise ConfigError("batch size must be >= 1")
    if shuffle:
        order = generator(seed, TAG_BATCH, epoch).permutation(len(ds))
    else:
        order = np.arange(len(ds))
    for start in range(0, len(ds), batch):
        idx = order[start : start + batch]
        yield ds.images[idx], ds.labels[idx]
