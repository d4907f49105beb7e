"""Model specifications, the detector registry and pool-level helpers."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..core import RngStream, check_matrix, derive_seed
from .abod import ABOD
from .bagging import FeatureBagging
from .hbos import HBOS
from .iforest import IForest
from .knn import KNN, AvgKNN
from .lof import LOF

DETECTORS = {
    "knn": KNN,
    "avg_knn": AvgKNN,
    "lof": LOF,
    "hbos": HBOS,
    "iforest": IForest,
    "abod": ABOD,
    "feature_bagging": FeatureBagging,
}
KINDS = tuple(DETECTORS) + ("unknown",)
_SEEDED = {"iforest", "feature_bagging"}


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    hyperparams: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown detector kind {self.kind!r}; expected one of {KINDS}")

    def build(self):
        """Instantiate the (unfitted) detector this spec describes."""
        if self.kind == "unknown":
            raise ValueError("kind 'unknown' has no native implementation and cannot be fit")
        cls = DETECTORS[self.kind]
        params = dict(self.hyperparams)
        if self.kind in _SEEDED:
            params["random_state"] = int(self.seed)
        try:
            return cls(**params)
        except TypeError as exc:
            raise ValueError(f"invalid hyperparameters for {self.kind}: {exc}") from None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hyperparams": dict(self.hyperparams), "seed": int(self.seed)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(d["kind"], dict(d.get("hyperparams", {})), int(d.get("seed", 0)))


def spec_of(detector) -> ModelSpec:
    """Describe an already constructed detector instance as a ModelSpec."""
    params = detector.get_params()
    seed = params.pop("random_state", 0)
    return ModelSpec(detector.kind, params, int(seed))


def generate_model_pool(grid: dict[str, dict[str, list]], rng: RngStream) -> list[ModelSpec]:
    """Cartesian product of each kind's hyperparameter lists, shuffled by ``rng``."""
    if not grid:
        raise ValueError("model grid is empty")
    specs = []
    for kind, params in grid.items():
        if kind not in DETECTORS:
            raise ValueError(f"unknown detector kind {kind!r} in grid")
        names = sorted(params)
        for name in names:
            if not isinstance(params[name], (list, tuple)) or len(params[name]) == 0:
                raise ValueError(f"hyperparameter {kind}.{name} needs a non-empty list")
        for combo in itertools.product(*(params[n] for n in names)):
            specs.append((kind, dict(zip(names, combo))))
    order = rng.generator().permutation(len(specs))
    return [
        ModelSpec(specs[j][0], specs[j][1], derive_seed(rng.seed ^ rng.stream_id, i))
        for i, j in enumerate(order)
    ]


def fit_model(spec: ModelSpec, x):
    """Fit the detector described by ``spec`` on ``x``."""
    return spec.build().fit(x)


def score_model(model, x) -> np.ndarray:
    return model.decision_function(x)


def score_pool(models, x) -> np.ndarray:
    """Score matrix with column ``j`` produced by ``models[j]``."""
    x = check_matrix(x)
    cols = []
    for j, model in enumerate(models):
        try:
            cols.append(model.decision_function(x))
        except Exception as exc:
            raise RuntimeError(f"model {j} ({getattr(model, 'kind', '?')}) failed to score: {exc}") from exc
    return np.column_stack(cols)
