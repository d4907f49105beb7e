from __future__ import annotations

import numpy as np

from .base import BaseDetector, require_int
from .neighbors import METRICS, kneighbors

# guards lrd against duplicate points (zero reachability)
_LRD_EPS = 1e-10


class LOF(BaseDetector):
    """Local Outlier Factor over exactly ``n_neighbors`` training neighbors.

    Parameters
    ----------
    n_neighbors : int, default=20
    metric : {'euclidean', 'manhattan', 'minkowski'}, default='euclidean'
    p : float, default=2
        Minkowski order, used only when ``metric='minkowski'``.
    """

    kind = "lof"

    def __init__(self, n_neighbors=20, metric="euclidean", p=2):
        self.n_neighbors = n_neighbors
        self.metric = metric
        self.p = p

    def _validate_params_for(self, X):
        k = require_int("n_neighbors", self.n_neighbors, 1)
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.metric == "minkowski" and not float(self.p) >= 1:
            raise ValueError("minkowski p must be >= 1")
        if k >= X.shape[0]:
            raise ValueError(f"n_neighbors={k} requires more than {k} training samples, got {X.shape[0]}")

    def _lrd(self, dist, idx):
        reach = np.maximum(dist, self.k_distance_[idx])
        return 1.0 / (reach.mean(axis=1) + _LRD_EPS)

    def _fit(self, X):
        self.X_train_ = X
        dist, idx = kneighbors(X, X, int(self.n_neighbors), self.metric, float(self.p), exclude_self=True)
        self.k_distance_ = dist[:, -1].copy()
        self.lrd_ = self._lrd(dist, idx)
        self.decision_scores_ = self.lrd_[idx].mean(axis=1) / self.lrd_

    def _score(self, X):
        dist, idx = kneighbors(X, self.X_train_, int(self.n_neighbors), self.metric, float(self.p))
        return self.lrd_[idx].mean(axis=1) / self._lrd(dist, idx)

    def get_state(self):
        return {
            "X_train": self.X_train_,
            "k_distance": self.k_distance_,
            "lrd": self.lrd_,
            "decision_scores": self.decision_scores_,
        }

    def set_state(self, state):
        self.X_train_ = state["X_train"]
        self.k_distance_ = state["k_distance"]
        self.lrd_ = state["lrd"]
        self.decision_scores_ = state["decision_scores"]
        self.n_features_in_ = self.X_train_.shape[1]
        return self
