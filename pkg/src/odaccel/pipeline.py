"""Training and scoring a heterogeneous detector pool with the three accelerations.

Projection (data level), pseudo-supervised approximation (model level) and
balanced scheduling (execution level) can each be toggled independently.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .approximation import CostlyPool, ForestRegressor, RandomForestConfig, pseudo_labels, should_approximate
from .combination import combine
from .core import RngStream, check_matrix, derive_seed
from .detectors.base import BaseDetector
from .detectors.pool import ModelSpec, spec_of
from .projection import METHODS, make_projection, project, resolve_projection
from .scheduling import (
    Assignment,
    CostPredictor,
    balanced_assign,
    execute_scheduled,
    extract_meta,
    generic_assign,
    imbalance,
    predict_cost,
    schedule_weights,
)

logger = logging.getLogger(__name__)

# projection hurts subspace/density methods; off by default for these kinds
NO_PROJECTION_KINDS = frozenset({"iforest", "hbos"})


def _as_spec(est) -> ModelSpec:
    if isinstance(est, ModelSpec):
        return est
    if isinstance(est, BaseDetector):
        return spec_of(est)
    if isinstance(est, dict):
        return ModelSpec.from_dict(est)
    raise TypeError(f"cannot interpret {est!r} as a detector specification")


@dataclass
class _Member:
    spec: ModelSpec
    projection: object
    model: BaseDetector
    approximator: ForestRegressor | None


class SUOD(BaseEstimator):
    """Fit and score a pool of unsupervised detectors.

    Parameters
    ----------
    base_estimators : list
        Detector instances, ``ModelSpec`` objects or their dict form.
    rp_flag_global : bool, default=True
        Enable random projection. Individual models can be overridden with
        ``rp_flags``; by default projection stays off for iforest and hbos.
    rp_flags : list of bool or None, default=None
        Per-model projection switch (takes precedence over the default policy).
    rp_method : str, default='toeplitz'
    target_dim : int or None, default=None
        Projected dimension; None means ``ceil(2d/3)``.
    approx_flag_global : bool, default=True
        Replace costly detectors by forest regressors at prediction time.
    approx_flags : list of bool or None, default=None
        Per-model approximation override.
    costly_kinds : iterable of str or None, default=None
        Kinds to approximate; None uses the default costly pool.
    approx_config : RandomForestConfig or None, default=None
    bps_flag : bool, default=True
        Balance work across workers using ``cost_predictor``.
    n_jobs : int, default=1
        Worker count. Results never depend on it.
    cost_predictor : CostPredictor or None, default=None
    alpha : float, default=1.0
        Rank discount strength.
    combination : {'average', 'max', 'moa'}, default='average'
    bucket_size : int, default=5
        Bucket size for 'moa'.
    standardize : bool, default=True
        Z-score each model's scores before combining.
    random_state : int, default=0
        Global seed; per-model seeds derive from it and the model index.
    """

    def __init__(
        self,
        base_estimators,
        rp_flag_global=True,
        rp_flags=None,
        rp_method="toeplitz",
        target_dim=None,
        approx_flag_global=True,
        approx_flags=None,
        costly_kinds=None,
        approx_config=None,
        bps_flag=True,
        n_jobs=1,
        cost_predictor=None,
        alpha=1.0,
        combination="average",
        bucket_size=5,
        standardize=True,
        random_state=0,
    ):
        self.base_estimators = base_estimators
        self.rp_flag_global = rp_flag_global
        self.rp_flags = rp_flags
        self.rp_method = rp_method
        self.target_dim = target_dim
        self.approx_flag_global = approx_flag_global
        self.approx_flags = approx_flags
        self.costly_kinds = costly_kinds
        self.approx_config = approx_config
        self.bps_flag = bps_flag
        self.n_jobs = n_jobs
        self.cost_predictor = cost_predictor
        self.alpha = alpha
        self.combination = combination
        self.bucket_size = bucket_size
        self.standardize = standardize
        self.random_state = random_state

    # -- configuration -----------------------------------------------------
    def _check_config(self, m):
        if m < 1:
            raise ValueError("at least one base estimator is required")
        if int(self.n_jobs) < 1:
            raise ValueError("n_jobs must be >= 1")
        if self.rp_method not in METHODS:
            raise ValueError(f"unknown projection method {self.rp_method!r}")
        if self.combination not in ("average", "max", "moa"):
            raise ValueError(f"unknown combination {self.combination!r}")
        if int(self.bucket_size) < 1:
            raise ValueError("bucket_size must be >= 1")
        for name in ("rp_flags", "approx_flags"):
            flags = getattr(self, name)
            if flags is not None and len(flags) != m:
                raise ValueError(f"{name} must have one entry per base estimator")

    def _model_seed(self, i):
        return derive_seed(int(self.random_state), i)

    def _projection_for(self, i, spec, d):
        if self.rp_flags is not None:
            on = bool(self.rp_flags[i])
        else:
            on = bool(self.rp_flag_global) and spec.kind not in NO_PROJECTION_KINDS
        method = self.rp_method if on else "none"
        return make_projection(resolve_projection(method, d, self.target_dim, derive_seed(self._model_seed(i), 0)), d)

    def _approximate(self, i, spec):
        if self.approx_flags is not None:
            return bool(self.approx_flags[i])
        pool = CostlyPool() if self.costly_kinds is None else CostlyPool(frozenset(self.costly_kinds))
        return bool(self.approx_flag_global) and should_approximate(spec.kind, pool)

    def _assign(self, specs, projections, n):
        """Worker assignment plus the weights it balanced (None for generic chunks)."""
        m, t = len(specs), int(self.n_jobs)
        if t == 1 or not self.bps_flag:
            return generic_assign(m, t), None
        if self.cost_predictor is None:
            logger.warning("balanced scheduling requested without a cost predictor; using generic assignment")
            return generic_assign(m, t), None
        costs = [predict_cost(self.cost_predictor, extract_meta(s, n, p.k)) for s, p in zip(specs, projections)]
        weights = schedule_weights(costs, self.alpha)
        return balanced_assign(weights, t), weights

    # -- fit / predict -----------------------------------------------------
    def fit(self, X, y=None):
        X = check_matrix(X, "X_train")
        specs = [_as_spec(e) for e in self.base_estimators]
        self._check_config(len(specs))
        n, d = X.shape
        cfg = self.approx_config or RandomForestConfig()
        projections = [self._projection_for(i, s, d) for i, s in enumerate(specs)]
        approx_on = [self._approximate(i, s) for i, s in enumerate(specs)]

        def task(i):
            def run():
                psi = project(X, projections[i])
                model = specs[i].build().fit(psi)
                approximator = None
                if approx_on[i]:
                    target = pseudo_labels(model, psi)
                    forest_cfg = RandomForestConfig(**{**cfg.to_dict(), "seed": derive_seed(self._model_seed(i), 1)})
                    approximator = ForestRegressor.from_config(forest_cfg).fit(psi, target)
                return model, approximator
            return run

        assignment, weights = self._assign(specs, projections, n)
        results = execute_scheduled([task(i) for i in range(len(specs))], assignment)

        self.members_ = [_Member(s, p, mdl, apx) for s, p, (mdl, apx) in zip(specs, projections, results)]
        self.n_features_in_ = d
        self.fit_assignment_ = assignment
        self.fit_weights_ = weights
        self.train_scores_ = np.column_stack([mem.model.decision_scores_ for mem in self.members_])
        self.decision_scores_ = self._combine(self.train_scores_)
        return self

    def _combine(self, scores):
        rng = RngStream(derive_seed(int(self.random_state), 1 << 32), 0)
        return combine(scores, self.combination, int(self.bucket_size), rng, bool(self.standardize))

    def score_matrix(self, X) -> np.ndarray:
        """Per-model outlyingness of ``X`` (columns in model order)."""
        check_is_fitted(self, "members_")
        X = check_matrix(X, "X_test")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"ensemble was fit on {self.n_features_in_} features, got {X.shape[1]}")
        members = self.members_

        def task(mem):
            def run():
                psi = project(X, mem.projection)
                if mem.approximator is not None:
                    return mem.approximator.predict(psi)
                return mem.model.decision_function(psi)
            return run

        assignment, _ = self._assign([m.spec for m in members], [m.projection for m in members], X.shape[0])
        self.predict_assignment_ = assignment
        return np.column_stack(execute_scheduled([task(m) for m in members], assignment))

    def decision_function(self, X) -> np.ndarray:
        return self._combine(self.score_matrix(X))

    # -- introspection ------------------------------------------------------
    @property
    def n_approximated_(self) -> int:
        return sum(m.approximator is not None for m in self.members_)

    def summary(self) -> dict:
        check_is_fitted(self, "members_")
        a: Assignment | None = self.fit_assignment_
        weights = getattr(self, "fit_weights_", None)
        return {
            "models": len(self.members_),
            "projected": sum(m.projection.method != "none" for m in self.members_),
            "approximated": self.n_approximated_,
            "workers": None if a is None else a.n_workers,
            "schedule": "balanced" if weights is not None else "generic",
            # generic chunks are judged on model counts
            "assignment_imbalance": None if a is None else imbalance(
                a, weights if weights is not None else np.ones(len(self.members_))),
        }

    def config_snapshot(self) -> dict:
        """Model-defining configuration; worker count and cost predictor are excluded."""
        cfg = self.approx_config or RandomForestConfig()
        return {
            "rp_flag_global": bool(self.rp_flag_global),
            "rp_flags": None if self.rp_flags is None else [bool(v) for v in self.rp_flags],
            "rp_method": self.rp_method,
            "target_dim": self.target_dim,
            "approx_flag_global": bool(self.approx_flag_global),
            "approx_flags": None if self.approx_flags is None else [bool(v) for v in self.approx_flags],
            "costly_kinds": None if self.costly_kinds is None else sorted(self.costly_kinds),
            "approx_config": cfg.to_dict(),
            "bps_flag": bool(self.bps_flag),
            "alpha": float(self.alpha),
            "combination": self.combination,
            "bucket_size": int(self.bucket_size),
            "standardize": bool(self.standardize),
            "random_state": int(self.random_state),
        }

    def strip_approximators(self) -> "SUOD":
        """Copy whose members all score with their original detectors."""
        clone = type(self)(**self.get_params())
        clone.__dict__.update({k: v for k, v in self.__dict__.items() if k.endswith("_")})
        clone.members_ = [_Member(m.spec, m.projection, m.model, None) for m in self.members_]
        return clone


def suod_fit(specs, x_train, cost: CostPredictor | None = None, **config) -> SUOD:
    return SUOD(list(specs), cost_predictor=cost, **config).fit(x_train)


def suod_predict(bundle: SUOD, x_test) -> np.ndarray:
    return bundle.score_matrix(x_test)
