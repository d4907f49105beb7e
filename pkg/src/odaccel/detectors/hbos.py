from __future__ import annotations

import numpy as np

from .base import BaseDetector, require_int


class HBOS(BaseDetector):
    """Histogram-based outlier score.

    Each feature gets an equal-width histogram over its training range. A
    sample's score is ``sum_f -log(freq_f(bin) + tolerance / n)`` where
    ``freq`` is the fraction of training points in the bin; values outside
    the training range fall into the edge bins.

    Parameters
    ----------
    n_histograms : int, default=10
        Number of bins per feature.
    tolerance : float, default=0.1
        Pseudo-count giving each bin a density floor of ``tolerance / n``.
    """

    kind = "hbos"

    def __init__(self, n_histograms=10, tolerance=0.1):
        self.n_histograms = n_histograms
        self.tolerance = tolerance

    def _validate_params_for(self, X):
        require_int("n_histograms", self.n_histograms, 2)
        if not float(self.tolerance) > 0:
            raise ValueError("tolerance must be > 0")

    def _bins(self, X):
        nb = self.edges_.shape[1] - 1
        lo = self.edges_[:, 0]
        width = self.edges_[:, -1] - lo
        safe = np.where(width > 0, width, 1.0)
        pos = np.floor((X - lo) / safe * nb)
        pos = np.where(width > 0, pos, 0.0)
        return np.clip(pos, 0, nb - 1).astype(np.int64)

    def _fit(self, X):
        n, d = X.shape
        nb = int(self.n_histograms)
        lo, hi = X.min(axis=0), X.max(axis=0)
        self.edges_ = lo[:, None] + (hi - lo)[:, None] * (np.arange(nb + 1) / nb)[None, :]
        self.edges_[:, -1] = hi
        bins = self._bins(X)
        counts = np.zeros((d, nb))
        for f in range(d):
            counts[f] = np.bincount(bins[:, f], minlength=nb)
        self.log_density_ = np.log(counts / n + float(self.tolerance) / n)
        self.decision_scores_ = self._score(X)

    def _score(self, X):
        bins = self._bins(X)
        feats = np.arange(X.shape[1])[None, :]
        return -self.log_density_[feats, bins].sum(axis=1)

    def get_state(self):
        return {"edges": self.edges_, "log_density": self.log_density_, "decision_scores": self.decision_scores_}

    def set_state(self, state):
        self.edges_ = state["edges"]
        self.log_density_ = state["log_density"]
        self.decision_scores_ = state["decision_scores"]
        self.n_features_in_ = self.edges_.shape[0]
        return self
