"""Recall@K and mean Recall@K over grouped predictions.

A group plays the role of one image: its instances are candidate relations
and only the ``k`` most confident predictions per group count as retrieved.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = ["Instance", "SceneGroup", "EvalReport", "recall_at_k", "groups_from_scores"]


@dataclass(frozen=True, eq=False)
class Instance:
    id: int
    true_class: int
    scores: np.ndarray


@dataclass(frozen=True, eq=False)
class SceneGroup:
    instances: tuple

    def __post_init__(self):
        inst = tuple(
            x if isinstance(x, Instance) else Instance(int(x[0]), int(x[1]), np.asarray(x[2], dtype=np.float64))
            for x in self.instances
        )
        if not inst:
            raise ValueError("a group needs at least one instance")
        object.__setattr__(self, "instances", inst)


@dataclass(frozen=True)
class EvalReport:
    k: int
    per_class: dict  # class index -> recall; classes with no ground truth are absent
    counts: dict  # class index -> ground-truth total
    mean_recall: float
    recall: float  # micro: all hits / all ground truth
    labels: Optional[tuple] = None

    def label_of(self, c: int) -> str:
        return self.labels[c] if self.labels is not None else str(c)

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "mean_recall": self.mean_recall,
            "recall": self.recall,
            "per_class": {self.label_of(c): r for c, r in sorted(self.per_class.items())},
            "counts": {self.label_of(c): n for c, n in sorted(self.counts.items())},
        }

    def to_dict(self) -> dict:
        """Lossless form keyed by class index (used inside run records)."""
        return {
            "k": self.k,
            "mean_recall": self.mean_recall,
            "recall": self.recall,
            "per_class": [[c, r] for c, r in sorted(self.per_class.items())],
            "counts": [[c, n] for c, n in sorted(self.counts.items())],
            "labels": list(self.labels) if self.labels is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            k=int(d["k"]),
            per_class={int(c): float(r) for c, r in d["per_class"]},
            counts={int(c): int(n) for c, n in d["counts"]},
            mean_recall=float(d["mean_recall"]),
            recall=float(d["recall"]),
            labels=tuple(d["labels"]) if d.get("labels") is not None else None,
        )

    def ordered_classes(self) -> list:
        """Classes by descending ground-truth count, ties by class index."""
        return sorted(self.per_class, key=lambda c: (-self.counts[c], c))

    def write_json(self, fh) -> None:
        json.dump(self.to_json(), fh, indent=2)
        fh.write("\n")

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "count", "recall"])
        for c in self.ordered_classes():
            w.writerow([self.label_of(c), self.counts[c], repr(self.per_class[c])])


def recall_at_k(
    groups: Sequence[SceneGroup],
    k: int,
    background_index: Optional[int] = None,
    labels: Optional[Sequence[str]] = None,
) -> EvalReport:
    """Per-class and mean Recall@K.

    Each instance predicts its argmax class. Within a group, the ``k``
    instances with the highest predicted-class score are retrieved (ties go
    to the smaller instance id). A retrieved instance whose argmax is its
    true class is a hit. Recalls pool hits over all groups. The background
    class, if given, is left out of every statistic.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    width = None
    hits: dict = {}
    counts: dict = {}
    for group in groups:
        ids, truth, conf, pred = [], [], [], []
        for inst in group.instances:
            s = np.asarray(inst.scores, dtype=np.float64)
            if width is None:
                width = s.shape[0]
            if s.ndim != 1 or s.shape[0] != width:
                raise ValueError(f"score vector of instance {inst.id} has shape {s.shape}, expected ({width},)")
            if not 0 <= inst.true_class < width:
                raise ValueError(f"true class {inst.true_class} of instance {inst.id} out of range")
            p = int(np.argmax(s))
            ids.append(inst.id)
            truth.append(inst.true_class)
            pred.append(p)
            conf.append(s[p])
        order = sorted(range(len(ids)), key=lambda i: (-conf[i], ids[i]))
        selected = set(order[:k])
        for i in range(len(ids)):
            t = truth[i]
            if t == background_index:
                continue
            counts[t] = counts.get(t, 0) + 1
            if i in selected and pred[i] == t:
                hits[t] = hits.get(t, 0) + 1

    per_class = {c: hits.get(c, 0) / counts[c] for c in sorted(counts)}
    mean = float(np.mean(list(per_class.values()))) if per_class else 0.0
    total = sum(counts.values())
    micro = sum(hits.values()) / total if total else 0.0
    return EvalReport(k, per_class, dict(sorted(counts.items())), mean, micro, tuple(labels) if labels is not None else None)


def groups_from_scores(scores: np.ndarray, labels: np.ndarray, group_size: int) -> list:
    """Split consecutive rows into groups of ``group_size``; instance id = row index."""
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    groups = []
    for start in range(0, scores.shape[0], group_size):
        stop = min(start + group_size, scores.shape[0])
        groups.append(SceneGroup(tuple(Instance(i, int(labels[i]), scores[i]) for i in range(start, stop))))
    return groups
