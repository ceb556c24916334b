"""Dataset container and loaders (CIFAR-10 binary batches, generic MIPD files, synthetic blobs)."""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInputError
from .formats import load_dataset, save_dataset

CIFAR_RECORDS = 10000
CIFAR_PIXELS = 3072
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILE = "test_batch.bin"


class Split(enum.Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: Split = Split.TRAIN

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise InvalidInputError(f"features must be 2-d, got shape {self.features.shape}")
        if self.features.shape[0] != self.labels.shape[0]:
            raise InvalidInputError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise InvalidInputError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and self.features.shape == other.features.shape
            and self.features.tobytes() == other.features.tobytes()
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None


def standardize(train: Dataset, *others: Dataset):
    """Zero-mean, unit-variance features using statistics of ``train`` only.

    Constant features are centred and left unscaled.
    """
    x = train.features.astype(np.float64)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std == 0] = 1.0
    out = []
    for d in (train, *others):
        feats = ((d.features.astype(np.float64) - mean) / std).astype(np.float32)
        out.append(Dataset(feats, d.labels, d.num_classes, d.split))
    return tuple(out)


def make_synthetic(num_classes, dim, samples_per_class, separation, seed):
    """Gaussian blobs with unit covariance whose class means are pairwise ``separation`` apart.

    Means sit on scaled coordinate axes when ``dim >= num_classes``, otherwise
    on random directions (pairwise distances then only approximate
    ``separation``). Each class is split 80/20 into train/test; features are
    standardised with the training statistics.
    """
    if num_classes < 2 or dim < 1 or samples_per_class < 5:
        raise InvalidInputError("need >= 2 classes, dim >= 1 and >= 5 samples per class")
    rng = np.random.default_rng([int(seed), 0xB10B])
    if dim >= num_classes:
        means = np.zeros((num_classes, dim))
        means[np.arange(num_classes), np.arange(num_classes)] = separation / np.sqrt(2.0)
    else:
        dirs = rng.standard_normal((num_classes, dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        means = dirs * separation / np.sqrt(2.0)
    n_train = int(round(0.8 * samples_per_class))
    tr_x, tr_y, te_x, te_y = [], [], [], []
    for k in range(num_classes):
        pts = means[k] + rng.standard_normal((samples_per_class, dim))
        tr_x.append(pts[:n_train])
        te_x.append(pts[n_train:])
        tr_y.append(np.full(n_train, k))
        te_y.append(np.full(samples_per_class - n_train, k))
    tr_x, tr_y = np.concatenate(tr_x), np.concatenate(tr_y)
    te_x, te_y = np.concatenate(te_x), np.concatenate(te_y)
    perm = rng.permutation(len(tr_y))
    train = Dataset(tr_x[perm], tr_y[perm], num_classes, Split.TRAIN)
    test = Dataset(te_x, te_y, num_classes, Split.TEST)
    return standardize(train, test)


def _read_cifar_batch(path: Path, records: int):
    expected = records * (1 + CIFAR_PIXELS)
    try:
        size = path.stat().st_size
    except FileNotFoundError:
        raise FormatError("missing CIFAR-10 batch file", os.fspath(path)) from None
    if size != expected:
        raise FormatError(f"batch must be exactly {expected} bytes, found {size}", os.fspath(path))
    raw = np.fromfile(path, dtype=np.uint8).reshape(records, 1 + CIFAR_PIXELS)
    labels = raw[:, 0].astype(np.int64)
    if labels.max() > 9:
        raise FormatError(f"label byte {labels.max()} out of range [0, 9]", os.fspath(path))
    return raw[:, 1:], labels


def load_cifar10_binary(directory, records_per_batch: int = CIFAR_RECORDS):
    """Read the standard CIFAR-10 binary distribution: five training batches and one test batch.

    Pixels are scaled to [0, 1] and then standardised per feature with the
    training-set statistics. ``records_per_batch`` exists for tests only.
    """
    directory = Path(directory)
    xs, ys = zip(*(_read_cifar_batch(directory / name, records_per_batch) for name in CIFAR_TRAIN_FILES))
    te_x, te_y = _read_cifar_batch(directory / CIFAR_TEST_FILE, records_per_batch)
    train = Dataset(np.concatenate(xs).astype(np.float32) / 255.0, np.concatenate(ys), 10, Split.TRAIN)
    test = Dataset(te_x.astype(np.float32) / 255.0, te_y, 10, Split.TEST)
    return standardize(train, test)


def is_cifar10_dir(directory) -> bool:
    directory = Path(directory)
    return all((directory / n).is_file() for n in CIFAR_TRAIN_FILES + (CIFAR_TEST_FILE,))


def load_dataset_generic(path, split: Split = Split.TRAIN) -> Dataset:
    """Load an ``MIPD`` file verbatim (features are expected to be normalised already)."""
    return load_dataset(path, split)


def save_dataset_generic(data: Dataset, path):
    save_dataset(data, path)
