from .abod import ABOD
from .bagging import FeatureBagging
from .base import BaseDetector
from .hbos import HBOS
from .iforest import IForest
from .knn import KNN, AvgKNN
from .lof import LOF
from .pool import DETECTORS, KINDS, ModelSpec, fit_model, generate_model_pool, score_model, score_pool, spec_of

__all__ = [
    "ABOD",
    "AvgKNN",
    "BaseDetector",
    "DETECTORS",
    "FeatureBagging",
    "HBOS",
    "IForest",
    "KINDS",
    "KNN",
    "LOF",
    "ModelSpec",
    "fit_model",
    "generate_model_pool",
    "score_model",
    "score_pool",
    "spec_of",
]
