"""Batch training losses: entropic OT against one-hot targets, and cross-entropy."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .ot import FIXED, SinkhornConfig, _as_cost, batch_transport_cost_gradient, log_softmax

__all__ = ["Reduction", "Batch", "LossValue", "ot_loss", "ce_loss", "ot_loss_closed_form"]


class Reduction(str, enum.Enum):
    SUM = "sum"
    MEAN = "mean"


@dataclass(frozen=True, eq=False)
class Batch:
    logits: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.logits, dtype=np.float64)
        t = np.asarray(self.targets)
        if z.ndim != 2 or z.shape[0] < 1 or z.shape[1] < 1:
            raise ValueError(f"logits must be a non-empty B x n matrix, got shape {z.shape}")
        if t.shape != (z.shape[0],):
            raise ValueError(f"need {z.shape[0]} targets, got shape {t.shape}")
        if not np.issubdtype(t.dtype, np.integer):
            raise ValueError("targets must be integer class indices")
        if np.any(t < 0) or np.any(t >= z.shape[1]):
            raise ValueError(f"targets must lie in [0, {z.shape[1]})")
        if not np.all(np.isfinite(z)):
            raise ValueError("logits must be finite")
        object.__setattr__(self, "logits", z)
        object.__setattr__(self, "targets", t.astype(np.int64))

    @property
    def size(self) -> int:
        return self.logits.shape[0]

    @property
    def n_classes(self) -> int:
        return self.logits.shape[1]

    def one_hot(self) -> np.ndarray:
        out = np.zeros_like(self.logits)
        out[np.arange(self.size), self.targets] = 1.0
        return out


@dataclass(frozen=True, eq=False)
class LossValue:
    value: float
    gradient: np.ndarray
    per_item: np.ndarray


def _reduce(per_item: np.ndarray, grads: np.ndarray, reduction) -> LossValue:
    reduction = Reduction(reduction)
    total = 0.0
    for x in per_item:  # index order, independent of any parallel evaluation
        total += float(x)
    if reduction is Reduction.MEAN:
        B = per_item.shape[0]
        return LossValue(total / B, grads / B, per_item)
    return LossValue(total, grads, per_item)


def ot_loss(batch: Batch, C, cfg: SinkhornConfig, reduction=Reduction.SUM) -> LossValue:
    """Entropic OT cost from ``softmax(logits_k)`` to ``onehot(target_k)``, reduced over the batch.

    Every item goes through ``cfg.fixed_iteration_count`` log-domain Sinkhorn
    iterations; the gradient is the exact derivative of that unrolled
    computation.
    """
    if cfg.mode != FIXED:
        raise ValueError("ot_loss needs a fixed-iteration SinkhornConfig")
    C = _as_cost(C)
    if C.shape != (batch.n_classes, batch.n_classes):
        raise ValueError(f"cost matrix {C.shape} does not match {batch.n_classes} classes")
    costs, grads = batch_transport_cost_gradient(batch.logits, batch.one_hot(), C, cfg)
    return _reduce(costs, grads, reduction)


def ot_loss_closed_form(batch: Batch, C) -> np.ndarray:
    """Per-item ``sum_i softmax(logits)_i * C[i, t]``.

    A one-hot target forces the whole plan into column ``t``, so this is the
    exact transport cost. Kept as a cross-check, not used for training.
    """
    C = _as_cost(C)
    a = np.exp(log_softmax(batch.logits))
    return np.einsum("bi,ib->b", a, C[:, batch.targets])


def ce_loss(batch: Batch, reduction=Reduction.SUM) -> LossValue:
    z = batch.logits
    B = batch.size
    rows = np.arange(B)
    top = np.argmax(z, axis=1)
    shifted = z - z[rows, top][:, None]
    e = np.exp(shifted)
    others = e.copy()
    others[rows, top] = 0.0
    rest = others.sum(axis=1)  # mass of every class except the argmax
    # -log softmax_t = log1p(rest) - shifted_t; log1p keeps tiny losses exact
    per_item = np.log1p(rest) - shifted[rows, batch.targets]
    probs = e / (1.0 + rest)[:, None]
    grads = probs.copy()
    grads[rows, batch.targets] -= 1.0
    return _reduce(per_item, grads, reduction)
