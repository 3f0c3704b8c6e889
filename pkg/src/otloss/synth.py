"""Synthetic long-tailed classification data with aligned label embeddings.

Classes are ranked by frequency (class 0, the background, is the most
frequent) with priors proportional to ``rank ** -zipf_exponent``. Non-background
classes are dealt round-robin into ``similarity_groups`` clusters so each
cluster mixes head and tail classes. A class's feature distribution is an
isotropic unit Gaussian around a mean near its cluster centroid, and its
embedding vector is that mean's direction. Labels that are confusable in
feature space are therefore close in embedding space.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass

import numpy as np

from .cost_matrix import LabelEmbeddingTable, LabelSet

__all__ = ["SynthConfig", "Dataset", "zipf_priors", "generate", "class_names", "write_dataset_csv", "read_dataset_csv"]

BACKGROUND = "background"


@dataclass(frozen=True)
class SynthConfig:
    n_classes: int = 21
    feature_dim: int = 16
    zipf_exponent: float = 1.5
    n_train: int = 20000
    n_test: int = 4000
    class_spread: float = 1.5
    similarity_groups: int = 5
    group_separation: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if self.zipf_exponent < 0:
            raise ValueError("zipf_exponent must be >= 0")
        if min(self.n_train, self.n_test) < self.n_classes:
            raise ValueError("sample counts must be >= n_classes")
        if not self.class_spread > 0 or not self.group_separation > 0:
            raise ValueError("class_spread and group_separation must be > 0")
        if not 1 <= self.similarity_groups <= self.n_classes - 1:
            raise ValueError("similarity_groups must be in [1, n_classes - 1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError(f"features {X.shape} and labels {y.shape} disagree")
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def class_frequencies(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def __len__(self):
        return self.labels.shape[0]


def zipf_priors(n: int, exponent: float) -> np.ndarray:
    w = np.arange(1, n + 1, dtype=np.float64) ** -exponent
    return w / w.sum()


def class_names(n: int) -> tuple:
    return (BACKGROUND,) + tuple(f"label{c:02d}" for c in range(1, n))


def _unit_rows(rng, k, d):
    v = rng.standard_normal((k, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def generate(config: SynthConfig):
    """Return ``(train, test, embedding_table, label_set)``; a pure function of ``config``."""
    rng = np.random.default_rng(config.seed)
    n, d = config.n_classes, config.feature_dim
    priors = zipf_priors(n, config.zipf_exponent)

    group = np.empty(n, dtype=np.int64)
    group[0] = config.similarity_groups  # background sits in its own cluster
    group[1:] = (np.arange(1, n) - 1) % config.similarity_groups
    centroids = config.group_separation * _unit_rows(rng, config.similarity_groups + 1, d)
    means = centroids[group] + config.class_spread * _unit_rows(rng, n, d)

    def sample(size):
        y = rng.choice(n, size=size, p=priors)
        X = means[y] + rng.standard_normal((size, d))
        return Dataset(X, y, n)

    train = sample(config.n_train)
    test = sample(config.n_test)
    names = class_names(n)
    table = LabelEmbeddingTable(d, {name: means[c] / np.linalg.norm(means[c]) for c, name in enumerate(names)})
    return train, test, table, LabelSet(names, background_index=0)


def write_dataset_csv(ds: Dataset, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["label", *(f"f{i}" for i in range(1, ds.features.shape[1] + 1))])
    for y, x in zip(ds.labels, ds.features):
        w.writerow([int(y), *(format(v, ".17g") for v in x)])


def read_dataset_csv(fh, n_classes: int) -> Dataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("dataset CSV is empty") from None
    if not header or header[0] != "label" or header[1:] != [f"f{i}" for i in range(1, len(header))]:
        raise ValueError("dataset CSV header must be 'label,f1,...,fd'")
    labels, rows = [], []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(header):
            raise ValueError(f"dataset CSV line {lineno}: expected {len(header)} fields, got {len(rec)}")
        try:
            labels.append(int(rec[0]))
            rows.append([float(v) for v in rec[1:]])
        except ValueError:
            raise ValueError(f"dataset CSV line {lineno}: malformed value") from None
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 1)
    return Dataset(X, np.array(labels, dtype=np.int64), n_classes)
