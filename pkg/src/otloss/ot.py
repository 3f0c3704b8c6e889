"""Entropic optimal transport: Sinkhorn solvers, exact small-instance optima,
and gradients through unrolled log-domain iterations.

All arithmetic is float64. Every function here is a pure function of its
arguments.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels

__all__ = [
    "CostMatrix",
    "SinkhornConfig",
    "SinkhornResult",
    "NumericalInstabilityError",
    "as_prob_vector",
    "sinkhorn",
    "sinkhorn_log",
    "exact_ot_bruteforce",
    "transport_cost_gradient",
    "batch_transport_cost_gradient",
    "log_softmax",
    "EPSILON_FLOOR",
]

PROB_SUM_TOL = 1e-12
EPSILON_FLOOR = 1e-4

TOLERANCE = "tolerance"
FIXED = "fixed"


class NumericalInstabilityError(ArithmeticError):
    """Standard-domain Sinkhorn produced a non-finite or zero scaling."""


def as_prob_vector(values, name: str = "vector") -> np.ndarray:
    """Validate ``values`` as a point on the probability simplex."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise ValueError(f"{name} must have finite nonnegative components")
    total = x.sum()
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise ValueError(f"{name} must sum to 1 (got {total!r})")
    return x


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Nonnegative n x m transport cost with optional axis labels."""

    entries: np.ndarray
    row_labels: Optional[tuple] = None
    col_labels: Optional[tuple] = None

    def __post_init__(self):
        C = np.array(self.entries, dtype=np.float64)
        if C.ndim != 2 or 0 in C.shape:
            raise ValueError(f"cost matrix must be a non-empty 2-D array, got shape {C.shape}")
        if not np.all(np.isfinite(C)) or np.any(C < 0):
            raise ValueError("cost matrix entries must be finite and >= 0")
        C.setflags(write=False)
        object.__setattr__(self, "entries", C)
        for attr, size in (("row_labels", C.shape[0]), ("col_labels", C.shape[1])):
            labels = getattr(self, attr)
            if labels is not None:
                labels = tuple(labels)
                if len(labels) != size:
                    raise ValueError(f"{attr} has {len(labels)} names for {size} entries")
                object.__setattr__(self, attr, labels)

    @property
    def shape(self):
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, CostMatrix):
            return NotImplemented
        return (
            np.array_equal(self.entries, other.entries)
            and self.row_labels == other.row_labels
            and self.col_labels == other.col_labels
        )


def _as_cost(C) -> np.ndarray:
    if isinstance(C, CostMatrix):
        return C.entries
    return CostMatrix(C).entries


@dataclass(frozen=True)
class SinkhornConfig:
    """Solver settings.

    ``mode="tolerance"`` stops once the L-inf change of the row potential
    drops to ``tolerance`` (at most ``max_iterations``). ``mode="fixed"`` runs
    exactly ``fixed_iteration_count`` iterations, which keeps the computation
    a fixed composition that can be differentiated.
    """

    epsilon: float = 1.0
    mode: str = TOLERANCE
    tolerance: float = 1e-9
    max_iterations: int = 1000
    fixed_iteration_count: int = 50

    def __post_init__(self):
        if self.mode not in (TOLERANCE, FIXED):
            raise ValueError(f"mode must be {TOLERANCE!r} or {FIXED!r}, got {self.mode!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1 or self.fixed_iteration_count < 1:
            raise ValueError("iteration counts must be >= 1")

    @property
    def iteration_budget(self) -> int:
        return self.fixed_iteration_count if self.mode == FIXED else self.max_iterations


@dataclass(frozen=True, eq=False)
class SinkhornResult:
    plan: np.ndarray
    row_potential: np.ndarray
    col_potential: np.ndarray
    transport_cost: float
    iterations: int
    converged: bool

    def marginal_errors(self, a, b) -> tuple:
        """L-inf deviation of the plan's row and column sums from ``a`` and ``b``."""
        return (
            float(np.max(np.abs(self.plan.sum(axis=1) - a))),
            float(np.max(np.abs(self.plan.sum(axis=0) - b))),
        )


def _check_shapes(a, b, C):
    if C.shape != (a.shape[0], b.shape[0]):
        raise ValueError(
            f"dimension mismatch: a has {a.shape[0]}, b has {b.shape[0]}, cost is {C.shape}"
        )


def sinkhorn(a, b, C, cfg: SinkhornConfig = SinkhornConfig()) -> SinkhornResult:
    """Standard-domain Sinkhorn matrix scaling.

    Iterates ``u <- a / (K v)``, ``v <- b / (K^T u)`` with ``K = exp(-C / eps)``
    starting from ``u = v = 1``. Requires strictly positive marginals; use
    :func:`sinkhorn_log` for zero-mass entries or small ``eps``.
    """
    a = as_prob_vector(a, "a")
    b = as_prob_vector(b, "b")
    C = _as_cost(C)
    _check_shapes(a, b, C)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("standard-domain sinkhorn needs strictly positive marginals; use sinkhorn_log")

    eps = float(cfg.epsilon)
    K = np.exp(-C / eps)
    u = np.ones_like(a)
    v = np.ones_like(b)
    run_all = cfg.mode == FIXED
    it = 0
    converged = False
    while it < cfg.iteration_budget:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            u_new = a / (K @ v)
            v = b / (K.T @ u_new)
        if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v)) and np.all(u_new > 0) and np.all(v > 0)):
            raise NumericalInstabilityError(
                f"exp(-C/eps) under/overflowed at eps={eps:g} (iteration {it + 1}); use sinkhorn_log"
            )
        delta = np.max(np.abs(u_new - u))
        u = u_new
        it += 1
        converged = bool(delta <= cfg.tolerance)
        if converged and not run_all:
            break

    plan = u[:, None] * K * v[None, :]
    return SinkhornResult(
        plan=plan,
        row_potential=u,
        col_potential=v,
        transport_cost=float(np.sum(C * plan)),
        iterations=it,
        converged=converged,
    )


def _safe_log(x: np.ndarray) -> np.ndarray:
    out = np.full_like(x, -np.inf)
    pos = x > 0
    out[pos] = np.log(x[pos])
    return out


def sinkhorn_log(a, b, C, cfg: SinkhornConfig = SinkhornConfig()) -> SinkhornResult:
    """Log-domain Sinkhorn on the dual potentials ``f, g``.

    Uses max-shifted log-sum-exp so nothing overflows for finite costs.
    Zero-mass rows/columns get potential ``-inf`` and an exactly zero plan
    row/column.

    >>> r = sinkhorn_log([0.5, 0.5], [0.5, 0.5], [[0.0, 1.0], [1.0, 0.0]])
    >>> np.round(r.plan, 8)
    array([[0.36552929, 0.13447071],
           [0.13447071, 0.36552929]])
    """
    a = as_prob_vector(a, "a")
    b = as_prob_vector(b, "b")
    C = _as_cost(C)
    _check_shapes(a, b, C)
    eps = float(cfg.epsilon)
    if eps < EPSILON_FLOOR:
        raise ValueError(f"epsilon={eps:g} is below the supported floor {EPSILON_FLOOR:g}")

    f, g, it, converged = _kernels.log_sinkhorn(
        _safe_log(a), _safe_log(b), np.ascontiguousarray(C), eps,
        cfg.iteration_budget, float(cfg.tolerance), cfg.mode == FIXED,
    )
    # -inf potentials give exp(-inf) == 0 exactly.
    plan = np.exp((f[:, None] + g[None, :] - C) / eps)
    return SinkhornResult(
        plan=plan,
        row_potential=f,
        col_potential=g,
        transport_cost=float(np.sum(C * plan)),
        iterations=int(it),
        converged=bool(converged),
    )


def exact_ot_bruteforce(a, b, C) -> float:
    """Exact (unregularized) optimal transport cost on tiny instances.

    Supported shapes: uniform ``a == b`` with ``n == m <= 8`` (the optimum
    sits on a permutation matrix) and any ``2 x 2`` instance (one free
    parameter, optimum at an endpoint of the feasible segment).
    """
    a = as_prob_vector(a, "a")
    b = as_prob_vector(b, "b")
    C = _as_cost(C)
    _check_shapes(a, b, C)
    n, m = C.shape

    if n == m == 2:
        # t = P[0, 0]; the rest of the plan follows from the marginals.
        lo = max(0.0, a[0] - b[1])
        hi = min(a[0], b[0])

        def cost(t):
            P = np.array([[t, a[0] - t], [b[0] - t, a[1] - b[0] + t]])
            return float(np.sum(C * P))

        return min(cost(lo), cost(hi))

    uniform = np.full(n, 1.0 / n)
    if n == m and n <= 8 and np.allclose(a, uniform, rtol=0, atol=1e-12) and np.allclose(b, uniform, rtol=0, atol=1e-12):
        cols = np.arange(n)
        best = min(C[cols, list(p)].sum() for p in itertools.permutations(range(n)))
        return float(best / n)

    raise ValueError(f"exact_ot_bruteforce supports uniform square n <= 8 or 2x2 instances, got {n}x{m}")


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def _require_fixed(cfg: SinkhornConfig):
    if cfg.mode != FIXED:
        raise ValueError("unrolled gradients need cfg.mode='fixed'")
    if cfg.epsilon < EPSILON_FLOOR:
        raise ValueError(f"epsilon={cfg.epsilon:g} is below the supported floor {EPSILON_FLOOR:g}")


def batch_transport_cost_gradient(logits, targets, C, cfg: SinkhornConfig) -> tuple:
    """Unrolled transport cost and its logits-gradient for each row of a batch.

    ``logits`` is ``B x n`` and ``targets`` the ``B x n`` target distributions.
    Each row runs ``cfg.fixed_iteration_count`` log-domain iterations from
    ``softmax(logits[k])`` to ``targets[k]``.

    Returns
    -------
    costs : ndarray, shape (B,)
    grads : ndarray, shape (B, n)
        Exact derivative of each row's cost with respect to its logits.
    """
    C = _as_cost(C)
    _require_fixed(cfg)
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    tb = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if z.shape != tb.shape or C.shape != (z.shape[1], z.shape[1]):
        raise ValueError(f"dimension mismatch: logits {z.shape}, targets {tb.shape}, cost {C.shape}")
    if not np.all(np.isfinite(tb)) or np.any(tb < 0) or np.any(np.abs(tb.sum(axis=1) - 1.0) > PROB_SUM_TOL):
        raise ValueError("every target row must be a probability vector")

    log_a = log_softmax(z)
    costs, la_bar = _kernels.batch_unrolled_cost_grad(
        np.ascontiguousarray(log_a), _safe_log(tb), np.ascontiguousarray(C),
        float(cfg.epsilon), int(cfg.fixed_iteration_count),
    )
    # chain through log_softmax: d la_i / d z_k = delta_ik - a_k
    a = np.exp(log_a)
    grads = la_bar - a * la_bar.sum(axis=1, keepdims=True)
    return costs, grads


def transport_cost_gradient(logits, b, C, cfg: SinkhornConfig) -> np.ndarray:
    """Gradient of the unrolled transport cost w.r.t. ``logits`` (single instance)."""
    b = as_prob_vector(b, "b")
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1:
        raise ValueError("logits must be 1-D")
    _, grads = batch_transport_cost_gradient(z[None, :], b[None, :], C, cfg)
    return grads[0]
