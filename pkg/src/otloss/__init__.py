"""Semantic optimal-transport loss for long-tailed classification."""

from .cost_matrix import LabelEmbeddingTable, LabelSet, build_cost_matrix, load_embeddings
from .harness import RunRecord, TrainConfig, compare, evaluate, train
from .losses import Batch, LossValue, Reduction, ce_loss, ot_loss
from .metrics import EvalReport, Instance, SceneGroup, recall_at_k
from .ot import (
    CostMatrix,
    NumericalInstabilityError,
    SinkhornConfig,
    SinkhornResult,
    exact_ot_bruteforce,
    sinkhorn,
    sinkhorn_log,
    transport_cost_gradient,
)
from .synth import Dataset, SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "CostMatrix",
    "Dataset",
    "EvalReport",
    "Instance",
    "LabelEmbeddingTable",
    "LabelSet",
    "LossValue",
    "NumericalInstabilityError",
    "Reduction",
    "RunRecord",
    "SceneGroup",
    "SinkhornConfig",
    "SinkhornResult",
    "SynthConfig",
    "TrainConfig",
    "build_cost_matrix",
    "ce_loss",
    "compare",
    "evaluate",
    "exact_ot_bruteforce",
    "generate",
    "load_embeddings",
    "ot_loss",
    "recall_at_k",
    "sinkhorn",
    "sinkhorn_log",
    "train",
    "transport_cost_gradient",
]
