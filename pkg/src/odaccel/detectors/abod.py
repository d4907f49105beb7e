from __future__ import annotations

import numpy as np

from .base import BaseDetector, require_int
from .neighbors import kneighbors


def _abof(points: np.ndarray, neigh: np.ndarray) -> np.ndarray:
    """Variance of angle-weighted cosines over all neighbor pairs.

    ``points`` is (q, d); ``neigh`` is (q, k, d). Pairs involving a neighbor
    that coincides with the query point are skipped.
    """
    k = neigh.shape[1]
    diff = neigh - points[:, None, :]
    gram = np.einsum("qid,qjd->qij", diff, diff)
    sq = np.einsum("qii->qi", gram)
    a, b = np.triu_indices(k, 1)
    denom = sq[:, a] * sq[:, b]
    valid = denom > 0
    wcos = np.where(valid, gram[:, a, b] / np.where(valid, denom, 1.0), 0.0)
    cnt = valid.sum(axis=1)
    safe = np.maximum(cnt, 1)
    mean = wcos.sum(axis=1) / safe
    var = (np.where(valid, (wcos - mean[:, None]) ** 2, 0.0)).sum(axis=1) / safe
    return np.where(cnt > 0, var, 0.0)


class ABOD(BaseDetector):
    """Fast angle-based outlier detection over the k nearest neighbors.

    The score is the negated angle-based outlier factor, so inliers (wide
    spread of angles) score low.
    """

    kind = "abod"

    def __init__(self, n_neighbors=10):
        self.n_neighbors = n_neighbors

    def _validate_params_for(self, X):
        k = require_int("n_neighbors", self.n_neighbors, 2)
        if k >= X.shape[0]:
            raise ValueError(f"n_neighbors={k} requires more than {k} training samples, got {X.shape[0]}")

    def _scores(self, X, exclude_self):
        k = int(self.n_neighbors)
        out = np.empty(X.shape[0], dtype=np.float64)
        step = max(1, (1 << 20) // (k * k + k * X.shape[1]))
        for s in range(0, X.shape[0], step):
            q = X[s:s + step]
            _, idx = kneighbors(q, self.X_train_, k, exclude_self=exclude_self, offset=s)
            out[s:s + step] = -_abof(q, self.X_train_[idx])
        return out

    def _fit(self, X):
        self.X_train_ = X
        self.decision_scores_ = self._scores(X, exclude_self=True)

    def _score(self, X):
        return self._scores(X, exclude_self=False)

    def get_state(self):
        return {"X_train": self.X_train_, "decision_scores": self.decision_scores_}

    def set_state(self, state):
        self.X_train_ = state["X_train"]
        self.decision_scores_ = state["decision_scores"]
        self.n_features_in_ = self.X_train_.shape[1]
        return self
