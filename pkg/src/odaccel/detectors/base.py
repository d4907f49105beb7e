from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..core import check_matrix


class BaseDetector(BaseEstimator):
    """Common surface of the unsupervised detectors.

    Subclasses implement ``_fit(X)`` (which must set ``decision_scores_``, the
    outlyingness of the training points with each point excluded from its
    own neighborhood), ``_score(X)``, and the ``get_state``/``set_state`` pair
    used by bundle serialization. Higher scores mean more outlying.
    """

    kind = "unknown"

    def fit(self, X, y=None):
        X = check_matrix(X, "X")
        self._validate_params_for(X)
        self.n_features_in_ = X.shape[1]
        self._fit(X)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "decision_scores_")
        X = check_matrix(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"{type(self).__name__} was fit on {self.n_features_in_} features, got {X.shape[1]}"
            )
        return self._score(X)

    def fit_predict_score(self, X):
        return self.fit(X).decision_scores_

    def _validate_params_for(self, X):
        pass

    def _fit(self, X):
        raise NotImplementedError

    def _score(self, X):
        raise NotImplementedError

    # serialization hooks -------------------------------------------------
    def get_state(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def set_state(self, state: dict[str, np.ndarray]):
        raise NotImplementedError


def require_int(name, value, minimum):
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
