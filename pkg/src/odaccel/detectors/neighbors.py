"""Exact brute-force neighbor search."""

from __future__ import annotations

import numpy as np

METRICS = ("euclidean", "manhattan", "minkowski")

# elements per temporary difference block
_BLOCK_BUDGET = 1 << 21


def distance_block(A: np.ndarray, B: np.ndarray, metric: str = "euclidean", p: float = 2.0) -> np.ndarray:
    """Full ``len(A) x len(B)`` distance matrix from explicit differences."""
    out = np.empty((A.shape[0], B.shape[0]), dtype=np.float64)
    step = max(1, _BLOCK_BUDGET // max(1, B.shape[0] * A.shape[1]))
    for i in range(0, A.shape[0], step):
        diff = A[i:i + step, None, :] - B[None, :, :]
        out[i:i + step] = _reduce_diff(diff, metric, p)
    return out


def _reduce_diff(diff, metric, p):
    if metric == "euclidean":
        return np.sqrt(np.einsum("...k,...k->...", diff, diff))
    if metric == "manhattan":
        return np.abs(diff).sum(axis=-1)
    if metric == "minkowski":
        return (np.abs(diff) ** p).sum(axis=-1) ** (1.0 / p)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


def _screen_block(A, B, b_sq, metric, p):
    """Distances used only to rank candidates; exact values are recomputed later."""
    if metric == "euclidean":
        sq = (A * A).sum(axis=1)[:, None] + b_sq[None, :] - 2.0 * (A @ B.T)
        return np.maximum(sq, 0.0)
    return distance_block(A, B, metric, p)


def _screen_slack(q, b_sq, metric):
    # bound on rounding error of the expanded squared distance; other metrics are exact
    if metric != "euclidean":
        return np.zeros(q.shape[0])
    scale = (q * q).sum(axis=1) + (b_sq.max() if b_sq.size else 0.0)
    return 1e-10 * scale


def kneighbors(query, train, k, metric="euclidean", p=2.0, exclude_self=False, offset=0, counter=None):
    """Distances and indices of the ``k`` nearest training points, sorted ascending.

    Ties are resolved toward the lower training index. With
    ``exclude_self=True`` query row ``i`` is training row ``offset + i`` and is
    removed from its own candidate list. Returned distances are computed from
    explicit coordinate differences. ``counter``, when a dict, accumulates the
    number of coordinate multiply-adds spent on distance evaluation under the
    key ``"distance_ops"``.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    n_q, n_t = query.shape[0], train.shape[0]
    if k > n_t - (1 if exclude_self else 0):
        raise ValueError(f"cannot find {k} neighbors among {n_t} training points")
    dist = np.empty((n_q, k), dtype=np.float64)
    idx = np.empty((n_q, k), dtype=np.int64)
    b_sq = (train * train).sum(axis=1)
    step = max(1, _BLOCK_BUDGET // max(1, n_t * max(1, train.shape[1] if metric != "euclidean" else 1)))
    step = min(step, 2048)
    for s in range(0, n_q, step):
        q = query[s:s + step]
        D = _screen_block(q, train, b_sq, metric, p)
        rows = np.arange(D.shape[0])
        if exclude_self:
            D[rows, rows + s + offset] = np.inf
        # k smallest by (distance, index): partition, then settle rows where the
        # boundary is not clear-cut using exact distances
        if k < n_t:
            part = np.argpartition(D, k - 1, axis=1)[:, :k]
            kth = np.take_along_axis(D, part, axis=1).max(axis=1)
            slack = _screen_slack(q, b_sq, metric)
            n_near = (D <= (kth + slack)[:, None]).sum(axis=1)
        else:
            part = np.tile(np.arange(n_t), (D.shape[0], 1))
            slack = None
            n_near = np.full(D.shape[0], k)
        for r in np.flatnonzero(n_near > k):
            near = np.flatnonzero(D[r] <= kth[r] + slack[r])
            exact = _reduce_diff(q[r][None, :] - train[near], metric, p)
            part[r] = near[np.lexsort((near, exact))[:k]]
        cand = np.take_along_axis(D, part, axis=1)
        order = np.lexsort((part, cand), axis=1)
        sel = np.take_along_axis(part, order, axis=1)
        idx[s:s + step] = sel
        exact = _reduce_diff(q[:, None, :] - train[sel], metric, p)
        dist[s:s + step] = exact
        if counter is not None:
            counter["distance_ops"] = counter.get("distance_ops", 0) + q.shape[0] * n_t * train.shape[1]
    # recomputed distances may reorder near-ties; keep rows sorted
    resort = np.lexsort((idx, dist), axis=1)
    return np.take_along_axis(dist, resort, axis=1), np.take_along_axis(idx, resort, axis=1)
