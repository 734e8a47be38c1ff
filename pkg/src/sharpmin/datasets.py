"""Synthetic classification data: deterministic Gaussian blobs.

Class centers are keyed by the seed alone; sample noise is keyed by
(seed, split), so split 0 (train) and split 1 (test) share centers but are
disjoint draws. Regenerating with the same arguments is bit-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .rng import TAG_DATA_CENTERS, TAG_DATA_SAMPLES, substream

CENTER_SCALE = 3.0


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64 in [0, classes)
    seed: int
    classes: int
    split: int = 0

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] < 1 or self.features.shape[1] < 1:
            raise ConfigurationError(f"features must be (n>=1, d>=1), got {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise ConfigurationError("labels must have one entry per sample")
        if self.classes < 1 or self.labels.min() < 0 or self.labels.max() >= self.classes:
            raise ConfigurationError(f"labels must lie in [0, {self.classes})")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


def generate_blobs(
    seed: int,
    n_per_class: int,
    d: int,
    classes: int,
    spread: float,
    split: int = 0,
) -> Dataset:
    """Gaussian clusters around per-class centers drawn from the seed.

    ``split`` offsets only the sample-noise stream, giving disjoint train/test
    sets over identical centers.
    """
    if n_per_class < 1 or d < 1 or classes < 1:
        raise ConfigurationError("n_per_class, d and classes must all be positive")
    if spread <= 0:
        raise ConfigurationError(f"spread must be positive, got {spread}")
    centers_rng = substream(seed, TAG_DATA_CENTERS)
    centers = centers_rng.normal(0.0, CENTER_SCALE, size=(classes, d))
    samples_rng = substream(seed, TAG_DATA_SAMPLES, split)
    noise = samples_rng.normal(0.0, spread, size=(classes, n_per_class, d))
    features = (centers[:, None, :] + noise).reshape(classes * n_per_class, d)
    labels = np.repeat(np.arange(classes, dtype=np.int64), n_per_class)
    return Dataset(features=features, labels=labels, seed=seed, classes=classes, split=split)


def export_csv(dataset: Dataset, path: str | Path) -> Path:
    """Write features and labels with header feature_0..feature_{d-1},label."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"feature_{j}" for j in range(dataset.d)] + ["label"])
        for x, y in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])
    return path


def import_csv(path: str | Path, seed: int = 0, classes: int | None = None, split: int = 0) -> Dataset:
    """Read a dataset written by :func:`export_csv` (exact float round-trip)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[-1] != "label" or not all(
            h == f"feature_{j}" for j, h in enumerate(header[:-1])
        ):
            raise ConfigurationError(f"unexpected dataset CSV header in {path}: {header}")
        rows = list(reader)
    features = np.array([[float(v) for v in row[:-1]] for row in rows], dtype=np.float64)
    labels = np.array([int(row[-1]) for row in rows], dtype=np.int64)
    if classes is None:
        classes = int(labels.max()) + 1 if labels.size else 1
    return Dataset(features=features, labels=labels, seed=seed, classes=classes, split=split)
