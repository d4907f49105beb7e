from __future__ import annotations

import math

import numpy as np

from ..core import RngStream
from .base import BaseDetector, require_int
from .lof import LOF


class FeatureBagging(BaseDetector):
    """Average of LOF detectors, each fit on a random feature subset.

    Subset sizes are drawn uniformly from ``[ceil(d/2), d-1]``; with a single
    feature every member sees it.
    """

    kind = "feature_bagging"

    def __init__(self, n_estimators=10, n_neighbors=10, random_state=0):
        self.n_estimators = n_estimators
        self.n_neighbors = n_neighbors
        self.random_state = random_state

    def _validate_params_for(self, X):
        require_int("n_estimators", self.n_estimators, 1)
        k = require_int("n_neighbors", self.n_neighbors, 1)
        if k >= X.shape[0]:
            raise ValueError(f"n_neighbors={k} requires more than {k} training samples, got {X.shape[0]}")

    def _fit(self, X):
        d = X.shape[1]
        self.subspaces_ = []
        self.estimators_ = []
        for i in range(int(self.n_estimators)):
            gen = RngStream(int(self.random_state), i).generator()
            if d >= 2:
                size = int(gen.integers(math.ceil(d / 2), d))  # upper bound exclusive -> at most d-1
                feats = np.sort(gen.choice(d, size=size, replace=False))
            else:
                feats = np.arange(d)
            est = LOF(n_neighbors=self.n_neighbors).fit(X[:, feats])
            self.subspaces_.append(feats)
            self.estimators_.append(est)
        self.decision_scores_ = np.mean([e.decision_scores_ for e in self.estimators_], axis=0)

    def _score(self, X):
        return np.mean([e.decision_function(X[:, f]) for e, f in zip(self.estimators_, self.subspaces_)], axis=0)

    def get_state(self):
        state = {"decision_scores": self.decision_scores_}
        for i, (est, feats) in enumerate(zip(self.estimators_, self.subspaces_)):
            state[f"est{i}.features"] = feats.astype(np.float64)
            for key, arr in est.get_state().items():
                state[f"est{i}.{key}"] = arr
        return state

    def set_state(self, state):
        self.decision_scores_ = state["decision_scores"]
        self.subspaces_, self.estimators_ = [], []
        i = 0
        while f"est{i}.features" in state:
            prefix = f"est{i}."
            sub = {k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)}
            self.subspaces_.append(sub.pop("features").astype(np.int64))
            self.estimators_.append(LOF(n_neighbors=self.n_neighbors).set_state(sub))
            i += 1
        return self
