"""Compiled log-domain Sinkhorn loops.

Inactive (zero-mass) rows and columns carry a ``-inf`` log-mass. They are
left out of every reduction, so their potentials stay ``-inf`` and their plan
entries come out as exact zeros. Work arrays are indexed by position in the
active ``rows``/``cols`` lists. All reductions run in fixed index order.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _update_rows(f, g, log_a, C, eps, rows, cols, W):
    # f_i = eps log a_i - eps LSE_j (g_j - C_ij) / eps; W <- softmax_j of the same terms
    if cols.size == 1:
        # one-hot target: LSE of one term, bit-identical to the general path
        j = cols[0]
        for ii in range(rows.size):
            i = rows[ii]
            W[ii, 0] = 1.0
            f[i] = eps * log_a[i] - eps * ((g[j] - C[i, j]) / eps)
        return
    for ii in range(rows.size):
        i = rows[ii]
        mx = -np.inf
        for jj in range(cols.size):
            s = (g[cols[jj]] - C[i, cols[jj]]) / eps
            W[ii, jj] = s
            if s > mx:
                mx = s
        acc = 0.0
        for jj in range(cols.size):
            e = np.exp(W[ii, jj] - mx)
            W[ii, jj] = e
            acc += e
        for jj in range(cols.size):
            W[ii, jj] /= acc
        f[i] = eps * log_a[i] - eps * (mx + np.log(acc))


@njit(cache=True)
def _update_cols(g, f, log_b, C, eps, rows, cols, W):
    for jj in range(cols.size):
        j = cols[jj]
        mx = -np.inf
        for ii in range(rows.size):
            s = (f[rows[ii]] - C[rows[ii], j]) / eps
            W[ii, jj] = s
            if s > mx:
                mx = s
        acc = 0.0
        for ii in range(rows.size):
            e = np.exp(W[ii, jj] - mx)
            W[ii, jj] = e
            acc += e
        for ii in range(rows.size):
            W[ii, jj] /= acc
        g[j] = eps * log_b[j] - eps * (mx + np.log(acc))


@njit(cache=True)
def _init_potentials(log_a, log_b):
    rows = np.flatnonzero(np.isfinite(log_a))
    cols = np.flatnonzero(np.isfinite(log_b))
    f = np.full(log_a.shape[0], -np.inf)
    g = np.full(log_b.shape[0], -np.inf)
    for i in rows:
        f[i] = 0.0
    for j in cols:
        g[j] = 0.0
    return f, g, rows, cols


@njit(cache=True)
def log_sinkhorn(log_a, log_b, C, eps, max_iter, tol, run_all):
    """Alternating f/g updates; returns ``(f, g, iterations, converged)``.

    With ``run_all`` every one of ``max_iter`` iterations is executed and
    ``converged`` only reports whether the last row-potential change was
    within ``tol``.
    """
    f, g, rows, cols = _init_potentials(log_a, log_b)
    W = np.empty((rows.size, cols.size))
    f_new = f.copy()
    it = 0
    converged = False
    while it < max_iter:
        _update_rows(f_new, g, log_a, C, eps, rows, cols, W)
        delta = 0.0
        for i in rows:
            d = abs(f_new[i] - f[i])
            if d > delta:
                delta = d
            f[i] = f_new[i]
        _update_cols(g, f, log_b, C, eps, rows, cols, W)
        it += 1
        converged = delta <= tol
        if converged and not run_all:
            break
    return f, g, it, converged


@njit(cache=True)
def unrolled_cost_grad(log_a, log_b, C, eps, n_iter):
    """Cost of the plan after ``n_iter`` iterations and its gradient w.r.t. ``log_a``.

    Reverse-mode differentiation of the finite composition. The forward pass
    keeps each iteration's soft-min weights; those are exactly the Jacobians
    ``d f_i / d g_j = -A_ij`` and ``d g_j / d f_i = -B_ij`` replayed backwards.
    """
    n = log_a.shape[0]
    m = log_b.shape[0]
    f, g, rows, cols = _init_potentials(log_a, log_b)
    nr, nc = rows.size, cols.size
    WA = np.empty((n_iter, nr, nc))
    WB = np.empty((n_iter, nr, nc))
    for k in range(n_iter):
        _update_rows(f, g, log_a, C, eps, rows, cols, WA[k])
        _update_cols(g, f, log_b, C, eps, rows, cols, WB[k])

    cost = 0.0
    f_bar = np.zeros(n)
    g_bar = np.zeros(m)
    for i in rows:
        for j in cols:
            p = np.exp((f[i] + g[j] - C[i, j]) / eps)
            cost += C[i, j] * p
            w = C[i, j] * p / eps
            f_bar[i] += w
            g_bar[j] += w

    la_bar = np.zeros(n)
    g_prev_bar = np.zeros(m)
    for k in range(n_iter - 1, -1, -1):
        B = WB[k]
        for jj in range(nc):
            gb = g_bar[cols[jj]]
            if gb != 0.0:
                for ii in range(nr):
                    f_bar[rows[ii]] -= gb * B[ii, jj]
        A = WA[k]
        for jj in range(nc):
            g_prev_bar[cols[jj]] = 0.0
        for ii in range(nr):
            i = rows[ii]
            fb = f_bar[i]
            la_bar[i] += eps * fb
            if fb != 0.0:
                for jj in range(nc):
                    g_prev_bar[cols[jj]] -= fb * A[ii, jj]
            f_bar[i] = 0.0
        g_bar, g_prev_bar = g_prev_bar, g_bar
    return cost, la_bar


@njit(cache=True)
def batch_unrolled_cost_grad(log_a, log_b, C, eps, n_iter):
    """Row-wise :func:`unrolled_cost_grad` over a batch sharing one cost matrix."""
    B, n = log_a.shape
    costs = np.empty(B)
    grads = np.empty((B, n))
    for k in range(B):
        c, gr = unrolled_cost_grad(log_a[k], log_b[k], C, eps, n_iter)
        costs[k] = c
        grads[k] = gr
    return costs, grads
