"""Slow, independent reference implementations used as test oracles.

Nothing here imports the package under test. Distances come from explicit
per-pair differences and neighbor order from a stable full sort, so ties go
to the lower index.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def dist_matrix(A, B, metric="euclidean", p=2.0):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    diff = A[:, None, :] - B[None, :, :]
    if metric == "euclidean":
        return np.sqrt((diff ** 2).sum(-1))
    if metric == "manhattan":
        return np.abs(diff).sum(-1)
    return (np.abs(diff) ** p).sum(-1) ** (1.0 / p)


def neighbors(query, train, k, metric="euclidean", p=2.0, exclude_self=False):
    D = dist_matrix(query, train, metric, p)
    if exclude_self:
        np.fill_diagonal(D, np.inf)
    idx = np.argsort(D, axis=1, kind="stable")[:, :k]
    return np.take_along_axis(D, idx, axis=1), idx


def knn_scores(train, query, k, method="largest", self_scores=False):
    dist, _ = neighbors(train if self_scores else query, train, k, exclude_self=self_scores)
    if method == "largest":
        return dist[:, -1]
    if method == "mean":
        return dist.mean(axis=1)
    return np.median(dist, axis=1)


def lof_scores(train, query, k, metric="euclidean", p=2.0, self_scores=False, eps=1e-10):
    d_tr, i_tr = neighbors(train, train, k, metric, p, exclude_self=True)
    k_dist = d_tr[:, -1]

    def lrd(dist, idx):
        out = np.empty(len(dist))
        for r in range(len(dist)):
            reach = [max(dist[r, j], k_dist[idx[r, j]]) for j in range(k)]
            out[r] = 1.0 / (sum(reach) / k + eps)
        return out

    lrd_tr = lrd(d_tr, i_tr)
    if self_scores:
        d_q, i_q, lrd_q = d_tr, i_tr, lrd_tr
    else:
        d_q, i_q = neighbors(query, train, k, metric, p)
        lrd_q = lrd(d_q, i_q)
    return np.array([np.mean(lrd_tr[i_q[r]]) / lrd_q[r] for r in range(len(d_q))])


def abod_scores(train, query, k, self_scores=False):
    q = train if self_scores else query
    _, idx = neighbors(q, train, k, exclude_self=self_scores)
    out = np.empty(len(q))
    for r in range(len(q)):
        vals = []
        for a, b in itertools.combinations(idx[r], 2):
            u = train[a] - q[r]
            v = train[b] - q[r]
            uu, vv = float(u @ u), float(v @ v)
            if uu == 0.0 or vv == 0.0:
                continue
            vals.append(float(u @ v) / (uu * vv))
        out[r] = -float(np.var(vals)) if vals else 0.0
    return out


def hbos_scores(train, query, n_bins, tol):
    train = np.asarray(train, float)
    n, d = train.shape
    total = np.zeros(len(query))
    for f in range(d):
        lo, hi = train[:, f].min(), train[:, f].max()
        width = (hi - lo) / n_bins

        def bin_of(v):
            if hi == lo:
                return 0
            b = int(math.floor((v - lo) / width))
            return min(max(b, 0), n_bins - 1)

        counts = [0] * n_bins
        for v in train[:, f]:
            counts[bin_of(v)] += 1
        for r, v in enumerate(query[:, f]):
            total[r] -= math.log(counts[bin_of(v)] / n + tol / n)
    return total


def auc_pairs(scores, labels):
    """P(outlier score > inlier score), ties 0.5, by enumerating all pairs."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    acc = 0.0
    for a in pos:
        for b in neg:
            acc += 1.0 if a > b else 0.5 if a == b else 0.0
    return acc / (len(pos) * len(neg))


def sq_dists_loops(m):
    n = len(m)
    out = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            out[i][j] = sum((m[i][c] - m[j][c]) ** 2 for c in range(len(m[i])))
    return np.array(out)


def matmul_loops(A, B):
    n, k = len(A), len(B[0])
    return np.array([[sum(A[i][c] * B[c][j] for c in range(len(B))) for j in range(k)] for i in range(n)])


def makespan_loads(worker_of, t, costs):
    loads = [0.0] * t
    for w, c in zip(worker_of, costs):
        loads[w] += c
    return loads


def best_makespan(weights, t):
    """Exhaustive minimum of the maximum worker sum."""
    best = math.inf
    for assign in itertools.product(range(t), repeat=len(weights)):
        best = min(best, max(makespan_loads(assign, t, weights)))
    return best
