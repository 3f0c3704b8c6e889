"""Training, evaluation and comparison of softmax classifiers under CE or OT loss."""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .losses import Batch, Reduction, ce_loss, ot_loss
from .metrics import EvalReport, groups_from_scores, recall_at_k
from .ot import FIXED, CostMatrix, SinkhornConfig, log_softmax
from .synth import Dataset

__all__ = [
    "LOSSES",
    "TrainConfig",
    "RunRecord",
    "NonFiniteLossError",
    "init_params",
    "forward",
    "train",
    "evaluate",
    "dataset_fingerprint",
    "compare",
    "REFERENCE_CONTEXT",
]

LOSSES = ("CE", "OT-SUM", "OT-MEAN")
MODELS = ("linear", "mlp")
DEFAULT_KS = (5, 15, 30)

# Published Visual Genome PredCls numbers (Motif backbone), shown as context only.
REFERENCE_CONTEXT = (
    "reference (Visual Genome PredCls, Motif): "
    "CE mR@50/100 = 15.99/17.30, OT(SUM) mR@50/100 = 17.55/20.95; "
    "desk-scale synthetic results are not comparable in absolute value"
)


class NonFiniteLossError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "OT-SUM"
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 0.05
    model: str = "linear"
    hidden_width: int = 32
    epsilon: float = 1.0
    sinkhorn_iterations: int = 50
    seed: int = 0
    group_size: int = 30
    ks: tuple = DEFAULT_KS

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        for name in ("epochs", "batch_size", "hidden_width", "sinkhorn_iterations", "group_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.learning_rate > 0 or not self.epsilon > 0:
            raise ValueError("learning_rate and epsilon must be > 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        ks = tuple(int(k) for k in self.ks)
        if not ks or min(ks) < 1:
            raise ValueError("ks must be a non-empty list of positive integers")
        object.__setattr__(self, "ks", ks)

    @property
    def sinkhorn(self) -> SinkhornConfig:
        return SinkhornConfig(epsilon=self.epsilon, mode=FIXED, fixed_iteration_count=self.sinkhorn_iterations)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ks"] = list(self.ks)
        return d


def init_params(cfg: TrainConfig, n_features: int, n_classes: int, rng) -> dict:
    if cfg.model == "linear":
        return {
            "W": 0.01 * rng.standard_normal((n_features, n_classes)),
            "b": np.zeros(n_classes),
        }
    h = cfg.hidden_width
    return {
        "W1": rng.standard_normal((n_features, h)) * np.sqrt(2.0 / n_features),
        "b1": np.zeros(h),
        "W2": 0.01 * rng.standard_normal((h, n_classes)),
        "b2": np.zeros(n_classes),
    }


def forward(params: dict, X: np.ndarray) -> np.ndarray:
    if "W" in params:
        return X @ params["W"] + params["b"]
    hidden = np.maximum(X @ params["W1"] + params["b1"], 0.0)
    return hidden @ params["W2"] + params["b2"]


def _backward(params: dict, X: np.ndarray, dlogits: np.ndarray) -> dict:
    if "W" in params:
        return {"W": X.T @ dlogits, "b": dlogits.sum(axis=0)}
    pre = X @ params["W1"] + params["b1"]
    hidden = np.maximum(pre, 0.0)
    dh = (dlogits @ params["W2"].T) * (pre > 0)
    return {
        "W1": X.T @ dh,
        "b1": dh.sum(axis=0),
        "W2": hidden.T @ dlogits,
        "b2": dlogits.sum(axis=0),
    }


def dataset_fingerprint(ds: Dataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.features, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(ds.labels, dtype="<i8").tobytes())
    return h.hexdigest()


@dataclass(eq=False)
class RunRecord:
    config: TrainConfig
    labels: tuple
    background_index: Optional[int]
    params: dict
    epoch_losses: list
    class_frequencies: list
    reports: dict = field(default_factory=dict)  # k -> EvalReport
    eval_dataset: Optional[str] = None
    wall_clock_seconds: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "labels": list(self.labels),
            "background_index": self.background_index,
            "params": {k: {"shape": list(v.shape), "values": v.ravel().tolist()} for k, v in sorted(self.params.items())},
            "epoch_losses": list(self.epoch_losses),
            "class_frequencies": list(self.class_frequencies),
            "reports": [self.reports[k].to_dict() for k in sorted(self.reports)],
            "eval_dataset": self.eval_dataset,
            "wall_clock_seconds": self.wall_clock_seconds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        cfg = d["config"]
        return cls(
            config=TrainConfig(**{**cfg, "ks": tuple(cfg["ks"])}),
            labels=tuple(d["labels"]),
            background_index=d["background_index"],
            params={k: np.array(v["values"], dtype=np.float64).reshape(v["shape"]) for k, v in d["params"].items()},
            epoch_losses=[float(x) for x in d["epoch_losses"]],
            class_frequencies=[int(x) for x in d["class_frequencies"]],
            reports={int(r["k"]): EvalReport.from_dict(r) for r in d["reports"]},
            eval_dataset=d.get("eval_dataset"),
            wall_clock_seconds=d.get("wall_clock_seconds"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunRecord":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, RunRecord):
            return NotImplemented
        return self.dumps() == other.dumps()


def train(
    cfg: TrainConfig,
    data: Dataset,
    labels: Sequence[str],
    background_index: Optional[int] = None,
    cost: Optional[CostMatrix] = None,
    test: Optional[Dataset] = None,
) -> RunRecord:
    """Plain mini-batch gradient descent; batch order comes from ``cfg.seed``."""
    if cfg.loss != "CE" and cost is None:
        raise ValueError(f"{cfg.loss} training needs a cost matrix")
    n = data.n_classes
    if len(labels) != n:
        raise ValueError(f"{len(labels)} label names for {n} classes")
    if cost is not None and cost.shape != (n, n):
        raise ValueError(f"cost matrix {cost.shape} does not match {n} classes")

    started = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    params = init_params(cfg, data.features.shape[1], n, rng)
    sk = cfg.sinkhorn
    reduction = Reduction.MEAN if cfg.loss == "OT-MEAN" else Reduction.SUM
    N = len(data)
    epoch_losses = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(N)
        total, batches = 0.0, 0
        for bi, start in enumerate(range(0, N, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            X = data.features[idx]
            logits = forward(params, X)
            if not np.all(np.isfinite(logits)):
                raise NonFiniteLossError(f"non-finite logits at epoch {epoch + 1}, batch {bi + 1}")
            batch = Batch(logits, data.labels[idx])
            if cfg.loss == "CE":
                lv = ce_loss(batch, Reduction.MEAN)
            else:
                lv = ot_loss(batch, cost, sk, reduction)
            if not np.isfinite(lv.value):
                raise NonFiniteLossError(f"non-finite loss at epoch {epoch + 1}, batch {bi + 1}")
            grads = _backward(params, X, lv.gradient)
            for k in params:
                params[k] = params[k] - cfg.learning_rate * grads[k]
            total += lv.value
            batches += 1
        epoch_losses.append(total / batches)

    record = RunRecord(
        config=cfg,
        labels=tuple(labels),
        background_index=background_index,
        params=params,
        epoch_losses=epoch_losses,
        class_frequencies=[int(c) for c in data.class_frequencies],
    )
    if test is not None:
        record.reports = evaluate(record, test)
        record.eval_dataset = dataset_fingerprint(test)
    record.wall_clock_seconds = time.perf_counter() - started
    return record


def evaluate(record: RunRecord, ds: Dataset, ks: Optional[Sequence[int]] = None) -> dict:
    """Recall reports keyed by K for the record's model on ``ds``."""
    if ds.n_classes != len(record.labels):
        raise ValueError(f"dataset has {ds.n_classes} classes, model has {len(record.labels)}")
    ks = tuple(ks) if ks is not None else record.config.ks
    scores = np.exp(log_softmax(forward(record.params, ds.features)))
    groups = groups_from_scores(scores, ds.labels, record.config.group_size)
    return {k: recall_at_k(groups, k, record.background_index, record.labels) for k in ks}


def compare(a: RunRecord, b: RunRecord) -> tuple:
    """Side-by-side per-class recall of two evaluated runs.

    Returns ``(rows, means)``: ``rows`` is a list of dicts ordered by
    descending training frequency of run ``a``; ``means`` maps K to
    ``(mean_a, mean_b, delta)``.
    """
    if a.labels != b.labels:
        raise ValueError("runs use different label sets")
    if not a.reports or not b.reports:
        raise ValueError("both runs must carry evaluation reports")
    if a.eval_dataset != b.eval_dataset:
        raise ValueError("runs were evaluated on different datasets")
    ks = sorted(set(a.reports) & set(b.reports))
    if not ks:
        raise ValueError("runs share no evaluated K")
    classes = sorted(a.reports[ks[0]].per_class)
    for k in ks:
        if sorted(a.reports[k].per_class) != classes or sorted(b.reports[k].per_class) != classes:
            raise ValueError("runs report different class sets")
    freq = a.class_frequencies
    classes.sort(key=lambda c: (-freq[c], c))
    rows = []
    for c in classes:
        row = {"label": a.labels[c], "class": c, "train_count": freq[c], "test_count": a.reports[ks[0]].counts[c]}
        for k in ks:
            ra, rb = a.reports[k].per_class[c], b.reports[k].per_class[c]
            row[f"recall_a@{k}"] = ra
            row[f"recall_b@{k}"] = rb
            row[f"delta@{k}"] = rb - ra
        rows.append(row)
    means = {}
    for k in ks:
        ma, mb = a.reports[k].mean_recall, b.reports[k].mean_recall
        means[k] = (ma, mb, mb - ma)
    return rows, means


def write_comparison_csv(rows: list, fh) -> None:
    if not rows:
        raise ValueError("nothing to compare")
    w = csv.writer(fh, lineterminator="\n")
    keys = list(rows[0])
    w.writerow(keys)
    for row in rows:
        w.writerow([repr(row[k]) if isinstance(row[k], float) else row[k] for k in keys])


def comparison_summary(a: RunRecord, b: RunRecord, means: dict) -> str:
    lines = [
        f"# {REFERENCE_CONTEXT}",
        f"A: loss={a.config.loss} seed={a.config.seed}",
        f"B: loss={b.config.loss} seed={b.config.seed}",
    ]
    for k, (ma, mb, d) in sorted(means.items()):
        if d > 0:
            winner = "B"
        elif d < 0:
            winner = "A"
        else:
            winner = "tie"
        lines.append(f"mR@{k}: A={ma:.4f} B={mb:.4f} delta(B-A)={d:+.4f} winner={winner}")
    return "\n".join(lines) + "\n"
