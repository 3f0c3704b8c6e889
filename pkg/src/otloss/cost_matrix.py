"""Semantic cost matrices from label word embeddings.

The cost between two labels is one minus the cosine similarity of their
vectors. A multi-word label uses the mean of its word vectors. The optional
background label costs the largest ordinary entry to and from every other
label, and zero to itself.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Optional, Union

import numpy as np

from .ot import CostMatrix

__all__ = [
    "EmbeddingFormatError",
    "MissingTokenError",
    "LabelEmbeddingTable",
    "LabelSet",
    "normalize_token",
    "load_embeddings",
    "dump_embeddings",
    "label_vector",
    "build_cost_matrix",
    "write_cost_matrix_csv",
    "read_cost_matrix_csv",
]


class EmbeddingFormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MissingTokenError(ValueError):
    def __init__(self, token: str, label: str):
        self.token = token
        self.label = label
        super().__init__(f"token {token!r} of label {label!r} is not in the embedding table")


def normalize_token(text: str) -> str:
    """Lowercase and collapse internal whitespace."""
    return " ".join(text.lower().split())


@dataclass(frozen=True, eq=False)
class LabelEmbeddingTable:
    dimension: int
    entries: dict

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("embedding dimension must be positive")
        clean = {}
        for token, vec in self.entries.items():
            v = np.asarray(vec, dtype=np.float64)
            if v.shape != (self.dimension,):
                raise ValueError(f"vector for {token!r} has shape {v.shape}, expected ({self.dimension},)")
            if not np.all(np.isfinite(v)) or not np.any(v):
                raise ValueError(f"vector for {token!r} must be finite with nonzero norm")
            v.setflags(write=False)
            clean[normalize_token(token)] = v
        object.__setattr__(self, "entries", clean)

    def __contains__(self, token):
        return normalize_token(token) in self.entries

    def __getitem__(self, token) -> np.ndarray:
        return self.entries[normalize_token(token)]

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class LabelSet:
    labels: tuple
    background_index: Optional[int] = None

    def __post_init__(self):
        labels = tuple(normalize_token(s) for s in self.labels)
        if not labels:
            raise ValueError("label set is empty")
        if any(not s for s in labels):
            raise ValueError("labels must be non-empty")
        if len(set(labels)) != len(labels):
            raise ValueError("labels must be unique")
        if self.background_index is not None and not 0 <= self.background_index < len(labels):
            raise ValueError(f"background_index {self.background_index} out of range")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_names(cls, names: Iterable[str], background: Optional[str] = None) -> "LabelSet":
        names = [normalize_token(s) for s in names]
        bg = None
        if background is not None:
            key = normalize_token(background)
            if key not in names:
                raise ValueError(f"background label {background!r} is not in the label list")
            bg = names.index(key)
        return cls(tuple(names), bg)

    def __len__(self):
        return len(self.labels)


def load_embeddings(source: Union[BinaryIO, bytes]) -> LabelEmbeddingTable:
    """Parse ``token<TAB>c1 c2 ... cd`` records (UTF-8, one per line).

    Blank lines are skipped. The dimension comes from the first record.
    """
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EmbeddingFormatError(f"not valid UTF-8 ({exc})") from None

    entries = {}
    dim = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        token, sep, rest = line.partition("\t")
        token = normalize_token(token)
        if not sep or not token:
            raise EmbeddingFormatError("expected 'token<TAB>values'", lineno)
        try:
            vec = np.array([float(x) for x in rest.split()], dtype=np.float64)
        except ValueError:
            raise EmbeddingFormatError(f"non-numeric component for {token!r}", lineno) from None
        if vec.size == 0:
            raise EmbeddingFormatError(f"no components for {token!r}", lineno)
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise EmbeddingFormatError(f"{token!r} has dimension {vec.size}, expected {dim}", lineno)
        if token in entries:
            raise EmbeddingFormatError(f"duplicate token {token!r}", lineno)
        if not np.all(np.isfinite(vec)):
            raise EmbeddingFormatError(f"non-finite component for {token!r}", lineno)
        if not np.any(vec):
            raise EmbeddingFormatError(f"zero-norm vector for {token!r}", lineno)
        entries[token] = vec
    if dim is None:
        raise EmbeddingFormatError("no records; cannot infer the embedding dimension")
    return LabelEmbeddingTable(dim, entries)


def dump_embeddings(table: LabelEmbeddingTable) -> bytes:
    lines = [
        token + "\t" + " ".join(format(x, ".17g") for x in vec)
        for token, vec in table.entries.items()
    ]
    return ("\n".join(lines) + "\n").encode("utf-8")


def label_vector(label: str, table: LabelEmbeddingTable) -> np.ndarray:
    tokens = normalize_token(label).split()
    if not tokens:
        raise ValueError("empty label")
    vecs = []
    for tok in tokens:
        if tok not in table.entries:
            raise MissingTokenError(tok, normalize_token(label))
        vecs.append(table.entries[tok])
    if len(vecs) == 1:
        return vecs[0].copy()
    return np.mean(vecs, axis=0)


def build_cost_matrix(labels: LabelSet, table: LabelEmbeddingTable) -> CostMatrix:
    n = len(labels)
    bg = labels.background_index
    idx = [i for i in range(n) if i != bg]

    C = np.zeros((n, n))
    if idx:
        V = np.stack([label_vector(labels.labels[i], table) for i in idx])
        U = V / np.linalg.norm(V, axis=1, keepdims=True)
        block = 1.0 - U @ U.T
        # matmul is not guaranteed bit-symmetric; rounding can leave -1e-16
        block = np.clip(0.5 * (block + block.T), 0.0, 2.0)
        np.fill_diagonal(block, 0.0)
        C[np.ix_(idx, idx)] = block
    if bg is not None:
        M = C[np.ix_(idx, idx)].max() if idx else 0.0
        C[bg, :] = M
        C[:, bg] = M
        C[bg, bg] = 0.0
    return CostMatrix(C, labels.labels, labels.labels)


def write_cost_matrix_csv(C: CostMatrix, fh) -> None:
    """Write ``C`` as CSV: label header row, label first column, ``%.17g`` entries."""
    rows = C.row_labels or tuple(str(i) for i in range(C.shape[0]))
    cols = C.col_labels or tuple(str(j) for j in range(C.shape[1]))
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["label", *cols])
    for name, row in zip(rows, C.entries):
        w.writerow([name, *(format(x, ".17g") for x in row)])


def read_cost_matrix_csv(fh) -> CostMatrix:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("cost-matrix CSV is empty") from None
    cols = tuple(header[1:])
    names, rows = [], []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(header):
            raise ValueError(f"cost-matrix CSV line {lineno}: expected {len(header)} fields, got {len(rec)}")
        names.append(rec[0])
        try:
            rows.append([float(x) for x in rec[1:]])
        except ValueError:
            raise ValueError(f"cost-matrix CSV line {lineno}: non-numeric entry") from None
    return CostMatrix(np.array(rows, dtype=np.float64), tuple(names), cols)
