"""Prototype selection with importance weights.

Greedily maximizes l(w) = w.mu - 0.5 w.K.w over nonnegative weights,
where mu_j is candidate j's mean RBF similarity to the target rows and K
is the candidate-candidate kernel restricted to selected prototypes. At
each step the candidate with the largest objective gradient joins the
set and the weights are refit by nonnegative least squares.
"""

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import DataError
from .numopt import nnls


@dataclass
class KernelConfig:
    gamma: float | None = None  # default 1/d

    def resolved(self, d):
        g = self.gamma if self.gamma is not None else 1.0 / d
        if g <= 0:
            raise ValueError("gamma must be positive")
        return g


@dataclass
class PrototypeSet:
    indices: list           # into the candidate pool, selection order
    weights: np.ndarray     # aligned with indices
    objective_trace: list   # objective after each greedy step
    pool_fingerprint: str


def rbf_kernel(A, B, gamma):
    """exp(-gamma * ||a - b||^2) for all pairs."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def select_prototypes(candidates, target, m, kernel: KernelConfig | None = None) -> PrototypeSet:
    """Pick m weighted prototypes from candidates that represent target.

    Deterministic; gradient ties break toward the lowest candidate index.
    """
    candidates = np.asarray(candidates, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if candidates.ndim != 2 or target.ndim != 2:
        raise ValueError("candidates and target must be 2-D")
    n, d = candidates.shape
    if n == 0 or target.shape[0] == 0:
        raise ValueError("candidates and target must be nonempty")
    if m > n:
        raise ValueError(f"cannot select {m} prototypes from {n} candidates")
    gamma = (kernel or KernelConfig()).resolved(d)

    mu = rbf_kernel(candidates, target, gamma).mean(axis=1)
    selected = []
    weights = np.zeros(0)
    K_sel = np.zeros((0, 0))
    cross = np.zeros((n, 0))  # kernel of every candidate vs selected
    trace = []

    for _ in range(m):
        grad = mu - (cross @ weights if selected else np.zeros(n))
        grad[selected] = -np.inf
        j = int(np.argmax(grad))  # argmax takes the lowest index on ties
        new_col = rbf_kernel(candidates, candidates[j : j + 1], gamma)[:, 0]
        cross = np.column_stack([cross, new_col])
        K_new = np.empty((len(selected) + 1, len(selected) + 1))
        K_new[:-1, :-1] = K_sel
        K_new[-1, :-1] = new_col[selected]
        K_new[:-1, -1] = new_col[selected]
        K_new[-1, -1] = 1.0
        K_sel = K_new
        selected.append(j)

        weights = _optimal_weights(K_sel, mu[selected])
        trace.append(float(weights @ mu[selected] - 0.5 * weights @ K_sel @ weights))

    fp = _fingerprint(candidates)
    return PrototypeSet(indices=selected, weights=weights,
                        objective_trace=trace, pool_fingerprint=fp)


def _optimal_weights(K, mu):
    """argmax_{w>=0} w.mu - 0.5 w.K.w via an NNLS reformulation.

    With K = L L^T the objective equals -0.5 ||L^T w - L^{-1} mu||^2 up
    to a constant. A vanishing jitter keeps duplicate prototypes (rank
    deficient K) factorizable.
    """
    k = K.shape[0]
    jitter = 1e-10
    for _ in range(8):
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(k))
            break
        except np.linalg.LinAlgError:
            jitter *= 100
    else:
        raise np.linalg.LinAlgError("kernel matrix not factorizable")
    rhs = np.linalg.solve(L, mu)
    return nnls(L.T, rhs)


def _fingerprint(arr):
    import hashlib

    h = hashlib.sha256(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


def explain_instance_by_prototypes(train, model, x, m,
                                   kernel: KernelConfig | None = None):
    """Neighbor table: m weighted training prototypes predicted like x.

    The candidate pool is the training rows the model assigns the same
    class as x; the query instance is the sole target. Columns come back
    sorted by weight descending, carrying encoded values and predictions.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    pred_x = int(nn.forward(model, x)[0].argmax())
    train_values = np.asarray(train.values, dtype=np.float64)
    pool_pred = nn.predict_classes(model, train_values)
    pool_idx = np.flatnonzero(pool_pred == pred_x)
    if pool_idx.size == 0:
        raise DataError("no training rows share the instance's predicted class")
    if m > pool_idx.size:
        raise ValueError(f"cannot select {m} prototypes from {pool_idx.size} candidates")

    proto = select_prototypes(train_values[pool_idx], x[None, :], m, kernel)
    order = np.argsort(-proto.weights, kind="stable")
    neighbors = []
    for rank, sel_pos in enumerate(order):
        row_idx = int(pool_idx[proto.indices[sel_pos]])
        neighbors.append({
            "rank": rank,
            "train_index": row_idx,
            "weight": float(proto.weights[sel_pos]),
            "predicted_class": int(pool_pred[row_idx]),
            "raw_label": train.raw_labels[row_idx],
            "values": train_values[row_idx].tolist(),
        })
    return {
        "query_class": pred_x,
        "pool_size": int(pool_idx.size),
        "objective_trace": proto.objective_trace,
        "prototypes": neighbors,
    }


def similarity_profile(prototype, x, train_stats):
    """Per-column similarity in [0, 1]: 1 when equal, shrinking with the
    squared gap measured in training standard deviations (floored)."""
    p = np.asarray(prototype, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    if p.size != x.size:
        raise ValueError("dimension mismatch")
    sigma = np.maximum(np.asarray(train_stats.std, dtype=np.float64), 1e-6)
    return np.exp(-((x - p) ** 2) / (2.0 * sigma ** 2))
