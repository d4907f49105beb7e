from __future__ import annotations

import numpy as np

from .base import BaseDetector, require_int
from .neighbors import kneighbors

_METHODS = ("largest", "mean", "median")


class KNN(BaseDetector):
    """Distance-to-neighbors detector.

    Parameters
    ----------
    n_neighbors : int, default=5
    method : {'largest', 'mean', 'median'}, default='largest'
        Score by the k-th neighbor distance, or the mean / median of the k
        neighbor distances.
    """

    kind = "knn"

    def __init__(self, n_neighbors=5, method="largest"):
        self.n_neighbors = n_neighbors
        self.method = method

    def _validate_params_for(self, X):
        k = require_int("n_neighbors", self.n_neighbors, 1)
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")
        if k >= X.shape[0]:
            raise ValueError(f"n_neighbors={k} requires more than {k} training samples, got {X.shape[0]}")

    def _reduce(self, dist):
        if self.method == "largest":
            return dist[:, -1].copy()
        if self.method == "mean":
            return dist.mean(axis=1)
        return np.median(dist, axis=1)

    def _fit(self, X):
        self.X_train_ = X
        dist, _ = kneighbors(X, X, int(self.n_neighbors), exclude_self=True)
        self.decision_scores_ = self._reduce(dist)

    def _score(self, X):
        dist, _ = kneighbors(X, self.X_train_, int(self.n_neighbors))
        return self._reduce(dist)

    def get_state(self):
        return {"X_train": self.X_train_, "decision_scores": self.decision_scores_}

    def set_state(self, state):
        self.X_train_ = state["X_train"]
        self.decision_scores_ = state["decision_scores"]
        self.n_features_in_ = self.X_train_.shape[1]
        return self


class AvgKNN(KNN):
    """kNN scored by the mean neighbor distance."""

    kind = "avg_knn"

    def __init__(self, n_neighbors=5):
        self.n_neighbors = n_neighbors

    @property
    def method(self):
        return "mean"
