"""Pseudo-supervised approximation of costly detectors by a regression forest."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import _cart
from .core import check_matrix, derive_seed
from .detectors.pool import KINDS

DEFAULT_COSTLY_KINDS = frozenset({"knn", "avg_knn", "lof", "abod", "feature_bagging", "unknown"})


@dataclass(frozen=True)
class RandomForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    features_per_split: int | float | None = None  # None -> ceil(d / 3)
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        f = self.features_per_split
        if f is not None and not f > 0:
            raise ValueError("features_per_split must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class CostlyPool:
    kinds: frozenset = DEFAULT_COSTLY_KINDS

    def __post_init__(self):
        kinds = frozenset(self.kinds)
        bad = kinds - set(KINDS)
        if bad:
            raise ValueError(f"unknown kinds in costly pool: {sorted(bad)}")
        object.__setattr__(self, "kinds", kinds)


def should_approximate(kind: str, pool: CostlyPool | None = None) -> bool:
    pool = CostlyPool() if pool is None else pool
    return kind in pool.kinds


class ForestRegressor(RegressorMixin, BaseEstimator):
    """Bagged CART regression forest with mean-squared-error splits.

    Parameters
    ----------
    n_trees : int, default=100
    max_depth : int or None, default=None
        None grows trees until leaves are pure or too small to split.
    min_samples_split : int, default=2
    features_per_split : int, float or None, default=None
        Features examined per split. A float is a fraction of d; None means
        ``ceil(d / 3)``.
    bootstrap : bool, default=True
    random_state : int, default=0
    """

    def __init__(self, n_trees=100, max_depth=None, min_samples_split=2, features_per_split=None,
                 bootstrap=True, random_state=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.features_per_split = features_per_split
        self.bootstrap = bootstrap
        self.random_state = random_state

    @classmethod
    def from_config(cls, cfg: RandomForestConfig):
        return cls(cfg.n_trees, cfg.max_depth, cfg.min_samples_split, cfg.features_per_split,
                   cfg.bootstrap, cfg.seed)

    def _n_split_features(self, d):
        f = self.features_per_split
        if f is None:
            return max(1, math.ceil(d / 3))
        if isinstance(f, float) and f <= 1.0:
            return max(1, math.ceil(f * d))
        if int(f) > d:
            raise ValueError(f"features_per_split={f} exceeds the {d} available features")
        return int(f)

    def fit(self, X, y):
        X = check_matrix(X)
        y = np.ascontiguousarray(y, dtype=np.float64).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} values")
        if not np.all(np.isfinite(y)):
            raise ValueError("y must be finite")
        # validates the hyperparameters
        RandomForestConfig(self.n_trees, self.max_depth, self.min_samples_split,
                           self.features_per_split, self.bootstrap, int(self.random_state))
        n, d = X.shape
        max_feat = self._n_split_features(d)
        depth = -1 if self.max_depth is None else int(self.max_depth)
        trees = []
        importance = np.zeros(d)
        for t in range(int(self.n_trees)):
            tree_seed = derive_seed(int(self.random_state), t)
            if self.bootstrap:
                rows = np.random.Generator(np.random.PCG64(tree_seed)).integers(0, n, size=n)
            else:
                rows = np.arange(n)
            *arrays, imp = _cart.build_tree(X, y, rows.astype(np.int64), depth, int(self.min_samples_split),
                                            max_feat, np.uint64(tree_seed))
            trees.append(arrays)
            total = imp.sum()
            if total > 0:
                importance += imp / total
        self._set_trees(trees)
        self.n_features_in_ = d
        self.feature_importances_ = importance / int(self.n_trees)
        return self

    def _set_trees(self, trees):
        self.tree_offsets_ = np.cumsum([0] + [len(t[0]) for t in trees]).astype(np.int64)
        self.feature_ = np.concatenate([t[0] for t in trees])
        self.threshold_ = np.concatenate([t[1] for t in trees])
        self.left_ = np.concatenate([t[2] for t in trees])
        self.right_ = np.concatenate([t[3] for t in trees])
        self.value_ = np.concatenate([t[4] for t in trees])

    def _traverse(self, X):
        check_is_fitted(self, "tree_offsets_")
        X = check_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"forest was fit on {self.n_features_in_} features, got {X.shape[1]}")
        return _cart.predict_trees(X, self.tree_offsets_, self.feature_, self.threshold_,
                                   self.left_, self.right_, self.value_)

    def predict(self, X):
        return self._traverse(X)[0]

    def comparison_counts(self, X) -> np.ndarray:
        """Split comparisons performed per sample during prediction."""
        return self._traverse(X)[1]

    @property
    def depths_(self) -> np.ndarray:
        return _cart.tree_depths(self.tree_offsets_, self.feature_, self.left_, self.right_)

    def get_state(self):
        return {
            "tree_offsets": self.tree_offsets_.astype(np.float64),
            "feature": self.feature_.astype(np.float64),
            "threshold": self.threshold_,
            "left": self.left_.astype(np.float64),
            "right": self.right_.astype(np.float64),
            "value": self.value_,
            "feature_importances": self.feature_importances_,
        }

    def set_state(self, state):
        self.tree_offsets_ = state["tree_offsets"].astype(np.int64)
        self.feature_ = state["feature"].astype(np.int64)
        self.threshold_ = state["threshold"]
        self.left_ = state["left"].astype(np.int64)
        self.right_ = state["right"].astype(np.int64)
        self.value_ = state["value"]
        self.feature_importances_ = state["feature_importances"]
        self.n_features_in_ = self.feature_importances_.shape[0]
        return self


Approximator = ForestRegressor


def fit_forest(x, y, cfg: RandomForestConfig | None = None) -> ForestRegressor:
    return ForestRegressor.from_config(cfg or RandomForestConfig()).fit(x, y)


def predict_forest(a: ForestRegressor, x) -> np.ndarray:
    return a.predict(x)


def pseudo_labels(model, psi) -> np.ndarray:
    """Training-set outlyingness of a fitted detector, used as regression targets.

    ``psi`` must be the matrix the model was fit on; the cached training
    scores (self-excluded for neighbor methods) are returned.
    """
    psi = check_matrix(psi)
    check_is_fitted(model, "decision_scores_")
    if psi.shape[1] != model.n_features_in_ or psi.shape[0] != model.decision_scores_.shape[0]:
        raise ValueError(
            f"psi has shape {psi.shape}, but the model was fit on "
            f"{model.decision_scores_.shape[0]} x {model.n_features_in_}"
        )
    return np.array(model.decision_scores_, dtype=np.float64)
