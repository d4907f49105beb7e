from __future__ import annotations

import math

import numpy as np

from ..core import RngStream
from .base import BaseDetector, require_int

_EULER = 0.5772156649015329


def average_path_length(n):
    """c(n): mean unsuccessful-search path length in a BST of ``n`` items."""
    n = np.asarray(n, dtype=np.float64)
    out = np.zeros_like(n)
    out[n == 2] = 1.0
    big = n > 2
    out[big] = 2.0 * (np.log(n[big] - 1.0) + _EULER) - 2.0 * (n[big] - 1.0) / n[big]
    return out


def _build_tree(X, features, height_limit, gen):
    # flat arrays; feature -1 marks a leaf whose subtree size is kept for c(size)
    feat, thr, left, right, size = [], [], [], [], []

    def grow(rows, depth):
        node = len(feat)
        feat.append(-1)
        thr.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(len(rows))
        if depth >= height_limit or len(rows) <= 1:
            return node
        sub = X[rows]
        for f in gen.permutation(features):
            lo, hi = sub[:, f].min(), sub[:, f].max()
            if hi > lo:
                break
        else:
            return node
        t = gen.uniform(lo, hi)
        mask = sub[:, f] < t
        feat[node] = int(f)
        thr[node] = float(t)
        left[node] = grow(rows[mask], depth + 1)
        right[node] = grow(rows[~mask], depth + 1)
        return node

    grow(np.arange(X.shape[0]), 0)
    return (
        np.array(feat, dtype=np.int64),
        np.array(thr, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(size, dtype=np.float64),
    )


class IForest(BaseDetector):
    """Isolation Forest.

    Parameters
    ----------
    n_estimators : int, default=100
    max_features : float, default=1.0
        Fraction of features each tree may split on (``ceil(max_features * d)``).
    max_samples : int, default=256
        Subsample size per tree, capped at n.
    random_state : int, default=0
    """

    kind = "iforest"

    def __init__(self, n_estimators=100, max_features=1.0, max_samples=256, random_state=0):
        self.n_estimators = n_estimators
        self.max_features = max_features
        self.max_samples = max_samples
        self.random_state = random_state

    def _validate_params_for(self, X):
        require_int("n_estimators", self.n_estimators, 1)
        require_int("max_samples", self.max_samples, 1)
        if not 0.0 < float(self.max_features) <= 1.0:
            raise ValueError("max_features must be in (0, 1]")

    def _fit(self, X):
        n, d = X.shape
        psi = min(int(self.max_samples), n)
        n_feat = max(1, math.ceil(float(self.max_features) * d))
        height_limit = math.ceil(math.log2(max(psi, 2)))
        trees = []
        for t in range(int(self.n_estimators)):
            gen = RngStream(int(self.random_state), t).generator()
            rows = gen.choice(n, size=psi, replace=False)
            features = np.sort(gen.choice(d, size=n_feat, replace=False))
            trees.append(_build_tree(X[rows], features, height_limit, gen))
        self._set_trees(trees)
        self.psi_ = psi
        self.decision_scores_ = self._score(X)

    def _set_trees(self, trees):
        self.tree_offsets_ = np.cumsum([0] + [len(t[0]) for t in trees]).astype(np.int64)
        self.feature_ = np.concatenate([t[0] for t in trees])
        self.threshold_ = np.concatenate([t[1] for t in trees])
        self.left_ = np.concatenate([t[2] for t in trees])
        self.right_ = np.concatenate([t[3] for t in trees])
        self.node_size_ = np.concatenate([t[4] for t in trees])

    def _score(self, X):
        n = X.shape[0]
        total = np.zeros(n)
        rows = np.arange(n)
        leaf_adj = average_path_length(self.node_size_)
        for start in self.tree_offsets_[:-1]:
            node = np.full(n, start, dtype=np.int64)
            depth = np.zeros(n)
            active = self.feature_[node] >= 0
            while active.any():
                a = rows[active]
                nd = node[a]
                go_left = X[a, self.feature_[nd]] < self.threshold_[nd]
                node[a] = np.where(go_left, self.left_[nd], self.right_[nd]) + start
                depth[a] += 1.0
                active = self.feature_[node] >= 0
            total += depth + leaf_adj[node]
        mean_path = total / (len(self.tree_offsets_) - 1)
        c = average_path_length(np.array([self.psi_]))[0] or 1.0
        return 2.0 ** (-mean_path / c)

    def get_state(self):
        return {
            "tree_offsets": self.tree_offsets_.astype(np.float64),
            "feature": self.feature_.astype(np.float64),
            "threshold": self.threshold_,
            "left": self.left_.astype(np.float64),
            "right": self.right_.astype(np.float64),
            "node_size": self.node_size_,
            "psi": np.array([self.psi_], dtype=np.float64),
            "decision_scores": self.decision_scores_,
        }

    def set_state(self, state):
        self.tree_offsets_ = state["tree_offsets"].astype(np.int64)
        self.feature_ = state["feature"].astype(np.int64)
        self.threshold_ = state["threshold"]
        self.left_ = state["left"].astype(np.int64)
        self.right_ = state["right"].astype(np.int64)
        self.node_size_ = state["node_size"]
        self.psi_ = int(state["psi"][0])
        self.decision_scores_ = state["decision_scores"]
        return self
