"""Labelled feature tables, stratified partitioning and synthetic wood-like textures."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "ClassLabel",
    "Sample",
    "Dataset",
    "FoldPlan",
    "DatasetError",
    "load_feature_table",
    "save_feature_table",
    "stratified_k_fold",
    "inner_split",
    "generate_synthetic_textures",
    "make_feature_recovery_data",
]


class DatasetError(ValueError):
    """Raised for malformed tables and impossible partitions."""


class ClassLabel(IntEnum):
    """Board quality grade. The ordering is metadata only."""

    A = 0
    B = 1
    C = 2

    @classmethod
    def parse(cls, token: str) -> "ClassLabel":
        try:
            return cls[token.strip()]
        except KeyError:
            raise DatasetError(f"unknown label token {token!r}") from None


N_CLASSES = len(ClassLabel)


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    label: ClassLabel


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable feature matrix with integer labels.

    ``ids`` are row indices into the table the dataset was cut from; they
    survive every ``subset`` call so partitions can be traced back.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    ids: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=int)
        if X.ndim != 2 or X.shape[0] == 0:
            raise DatasetError("dataset must be a non-empty 2-d feature matrix")
        if y.shape != (X.shape[0],):
            raise DatasetError("one label per sample required")
        if not np.all(np.isfinite(X)):
            raise DatasetError("feature values must be finite")
        if np.any((y < 0) | (y >= N_CLASSES)):
            raise DatasetError("labels must be class indices 0..2")
        names = tuple(self.feature_names)
        if len(names) != X.shape[1]:
            raise DatasetError(
                f"{len(names)} feature names for {X.shape[1]} feature columns"
            )
        ids = np.arange(X.shape[0]) if self.ids is None else np.array(self.ids, dtype=int)
        if ids.shape != y.shape:
            raise DatasetError("one id per sample required")
        X.setflags(write=False)
        y.setflags(write=False)
        ids.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "ids", ids)

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], feature_names: Sequence[str]) -> "Dataset":
        X = np.array([s.features for s in samples], dtype=float)
        y = np.array([int(s.label) for s in samples], dtype=int)
        return cls(X, y, tuple(feature_names))

    def __len__(self) -> int:
        return self.y.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def samples(self) -> list[Sample]:
        return [Sample(x, ClassLabel(int(c))) for x, c in zip(self.X, self.y)]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=N_CLASSES)

    def subset(self, index) -> "Dataset":
        index = np.asarray(index, dtype=int)
        return type(self)(self.X[index], self.y[index], self.feature_names, self.ids[index])

    def with_features(self, X: np.ndarray, feature_names: Sequence[str]) -> "Dataset":
        """Same samples and labels, different feature columns."""
        return type(self)(X, self.y, tuple(feature_names), self.ids)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray

    def test_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def split(self, dataset: Dataset, fold: int) -> tuple[Dataset, Dataset]:
        """Return ``(train, test)`` for one outer fold."""
        return dataset.subset(self.train_index(fold)), dataset.subset(self.test_index(fold))


def _require_class_counts(counts: np.ndarray, minimum: int, reason: str) -> None:
    for label, count in zip(ClassLabel, counts):
        if count < minimum:
            raise DatasetError(
                f"class {label.name} has {count} sample(s); {reason} needs at least {minimum}"
            )


def load_feature_table(path) -> Dataset:
    """Read a comma-separated feature table with a trailing ``label`` column."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"feature table not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if "label" not in header:
            raise DatasetError(f"{path}: header has no 'label' column")
        label_col = header.index("label")
        names = [h for i, h in enumerate(header) if i != label_col]
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DatasetError(
                    f"{path}: row {lineno} has {len(row)} columns, expected {len(header)}"
                )
            values = []
            for i, cell in enumerate(row):
                if i == label_col:
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise DatasetError(
                        f"{path}: row {lineno}: non-numeric value {cell!r} in column {header[i]!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DatasetError(f"{path}: row {lineno}: non-finite value in column {header[i]!r}")
                values.append(v)
            try:
                labels.append(ClassLabel.parse(row[label_col]))
            except DatasetError as exc:
                raise DatasetError(f"{path}: row {lineno}: {exc}") from None
            rows.append(values)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    dataset = Dataset(np.array(rows, dtype=float), np.array(labels, dtype=int), names)
    _require_class_counts(dataset.class_counts(), 2, "stratification")
    return dataset


def save_feature_table(dataset: Dataset, path) -> None:
    # repr() round-trips floats exactly
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*dataset.feature_names, "label"])
        for x, c in zip(dataset.X, dataset.y):
            writer.writerow([repr(float(v)) for v in x] + [ClassLabel(int(c)).name])


def stratified_k_fold(dataset: Dataset, k: int, seed: int) -> FoldPlan:
    """Assign every sample to one of ``k`` folds, preserving class proportions.

    Each class is shuffled with the seeded generator and dealt round-robin;
    the deal continues where the previous class stopped so fold sizes stay
    within one sample of each other.
    """
    if k < 2:
        raise DatasetError("k must be at least 2")
    _require_class_counts(dataset.class_counts(), k, f"{k}-fold stratification")
    rng = np.random.default_rng(seed)
    assignments = np.empty(len(dataset), dtype=int)
    offset = 0
    for c in range(N_CLASSES):
        members = rng.permutation(np.flatnonzero(dataset.y == c))
        assignments[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    assignments.setflags(write=False)
    return FoldPlan(k, assignments)


def inner_split(
    train_portion: Dataset, seed: int, validation_fraction: float = 0.2
) -> tuple[Dataset, Dataset]:
    """Stratified holdout of the outer-training portion into train and validation."""
    _require_class_counts(train_portion.class_counts(), 2, "a train/validation split")
    rng = np.random.default_rng(seed)
    train_idx, val_idx = [], []
    for c in range(N_CLASSES):
        members = rng.permutation(np.flatnonzero(train_portion.y == c))
        n_val = min(max(int(math.floor(validation_fraction * members.size + 0.5)), 1), members.size - 1)
        val_idx.append(members[:n_val])
        train_idx.append(members[n_val:])
    train_idx = np.sort(np.concatenate(train_idx))
    val_idx = np.sort(np.concatenate(val_idx))
    return train_portion.subset(train_idx), train_portion.subset(val_idx)


# --------------------------------------------------------------------------
# synthetic data


def _smooth_noise(rng: np.random.Generator, size: int, scale: int) -> np.ndarray:
    """Low-frequency noise: coarse random grid upsampled bilinearly."""
    coarse = rng.normal(size=(scale + 1, scale + 1))
    t = np.linspace(0.0, scale, size)
    i0 = np.minimum(t.astype(int), scale - 1)
    f = t - i0
    rows = coarse[i0] * (1 - f)[:, None] + coarse[i0 + 1] * f[:, None]
    return rows[:, i0] * (1 - f)[None, :] + rows[:, i0 + 1] * f[None, :]


def _grain(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    angle = rng.uniform(-0.15, 0.15)
    freq = rng.uniform(0.15, 0.45)
    warp = 3.0 * _smooth_noise(rng, size, 3)
    return np.sin(freq * (yy * math.cos(angle) + xx * math.sin(angle)) + warp)


def _blobs(rng: np.random.Generator, size: int, count: int, radius: tuple[float, float]) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    canvas = np.zeros((size, size))
    for _ in range(count):
        cy, cx = rng.uniform(0, size, 2)
        r = rng.uniform(*radius)
        depth = rng.uniform(0.5, 1.0)
        canvas += depth * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))
    return canvas


def _streaks(rng: np.random.Generator, size: int, count: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    canvas = np.zeros((size, size))
    for _ in range(count):
        theta = rng.uniform(0, math.pi)
        offset = rng.uniform(-size / 2, size / 2)
        width = rng.uniform(0.6, 1.6)
        dist = (xx - size / 2) * math.sin(theta) - (yy - size / 2) * math.cos(theta) - offset
        canvas += rng.uniform(0.4, 0.9) * np.exp(-(dist**2) / (2 * width**2))
    return canvas


def _texture(rng: np.random.Generator, label: ClassLabel, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(float) / size
    theta = rng.uniform(0, 2 * math.pi)
    gradient = math.cos(theta) * xx + math.sin(theta) * yy
    base = 150 + 40 * gradient + 18 * rng.uniform(0.5, 1.5) * _grain(rng, size)
    # defect counts overlap between grades so the task is not trivially separable
    if label is ClassLabel.A:
        dark = _blobs(rng, size, rng.integers(0, 2), (1.5, 3.0))
    elif label is ClassLabel.B:
        dark = _blobs(rng, size, rng.integers(1, 5), (1.5, 4.0))
    else:
        dark = _blobs(rng, size, rng.integers(3, 9), (1.5, 4.5))
        dark += _streaks(rng, size, rng.integers(0, 3))
    image = base - 90 * dark + rng.normal(0, rng.uniform(4, 14), (size, size))
    return np.clip(np.rint(image), 0, 255).astype(np.uint8)


def generate_synthetic_textures(
    n_per_class: int, image_size: int = 64, seed: int = 0
) -> tuple[list[np.ndarray], list[ClassLabel]]:
    """Three grades of wood-like grayscale texture.

    ``A`` is a clean shaded grain, ``B`` adds a few dark knots and ``C`` adds
    many knots plus streaks. Each image has its own generator derived from
    ``(seed, label, index)`` so output is bit-identical across calls.
    """
    if n_per_class < 1:
        raise DatasetError("n_per_class must be positive")
    if image_size < 16:
        raise DatasetError("image_size must be at least 16 pixels")
    images, labels = [], []
    for label in ClassLabel:
        for i in range(n_per_class):
            rng = np.random.default_rng([seed, int(label), i])
            images.append(_texture(rng, label, image_size))
            labels.append(label)
    return images, labels


def make_feature_recovery_data(
    n_per_class: int = 60,
    n_informative: int = 10,
    n_noise: int = 28,
    separation: float = 0.6,
    seed: int = 0,
) -> tuple[Dataset, np.ndarray]:
    """Gaussian classes on ``n_informative`` columns mixed with pure-noise columns.

    Every informative column carries a little class signal of its own, so
    dropping any of them costs accuracy. Columns are shuffled; the returned
    boolean vector marks the informative ones.
    """
    rng = np.random.default_rng(seed)
    n = n_per_class * N_CLASSES
    y = np.repeat(np.arange(N_CLASSES), n_per_class)
    centroids = rng.normal(size=(N_CLASSES, n_informative))
    centroids -= centroids.mean(axis=0)
    centroids *= separation / np.linalg.norm(centroids, axis=0, keepdims=True).clip(1e-12)
    informative = centroids[y] + rng.normal(size=(n, n_informative))
    noise = rng.normal(size=(n, n_noise))
    X = np.hstack([informative, noise])
    order = rng.permutation(n_informative + n_noise)
    X = X[:, order]
    is_informative = order < n_informative
    names = [f"f{i}" for i in range(X.shape[1])]
    return Dataset(X, y, names), is_informative
