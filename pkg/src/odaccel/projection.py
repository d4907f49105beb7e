"""Johnson-Lindenstrauss random projections and random feature selection."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import RngStream, check_matrix, pairwise_sq_dists

logger = logging.getLogger(__name__)

MATRIX_METHODS = ("basic", "discrete", "circulant", "toeplitz")
METHODS = MATRIX_METHODS + ("feature_select", "none")


def jl_target_dim(n: int, epsilon: float) -> int:
    """Minimum JL dimension ``ceil(4 ln n / (eps^2/2 - eps^3/3))``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must be in (0, 1)")
    if n < 2:
        raise ValueError("n must be >= 2")
    return max(1, math.ceil(4.0 * math.log(n) / (epsilon ** 2 / 2.0 - epsilon ** 3 / 3.0)))


def default_target_dim(d: int) -> int:
    return math.ceil(2.0 * d / 3.0)


@dataclass(frozen=True)
class ProjectionSpec:
    method: str = "toeplitz"
    target_dim: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown projection method {self.method!r}; expected one of {METHODS}")


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """A materialized projection. ``W`` is stored as k x d."""

    method: str
    d: int
    k: int
    seed: int = 0
    W: np.ndarray | None = field(default=None, repr=False)
    selected: np.ndarray | None = None

    def descriptor(self) -> dict:
        return {"method": self.method, "d": self.d, "k": self.k, "seed": self.seed}


def _circulant(gen: np.random.Generator, k: int, d: int) -> np.ndarray:
    # Base vector has length max(k, d): for k <= d every row is the previous
    # one rotated right by one; for k > d rows are windows of a longer cycle
    # instead of repeating after d rows.
    length = max(k, d)
    c = gen.standard_normal(length)
    i = np.arange(k)[:, None]
    j = np.arange(d)[None, :]
    return c[(j - i) % length]


def _toeplitz(gen: np.random.Generator, k: int, d: int) -> np.ndarray:
    first_row = gen.standard_normal(d)
    first_col = gen.standard_normal(k)
    first_col[0] = first_row[0]
    i = np.arange(k)[:, None]
    j = np.arange(d)[None, :]
    return np.where(j >= i, first_row[np.clip(j - i, 0, d - 1)], first_col[np.clip(i - j, 0, k - 1)])


def make_projection(spec: ProjectionSpec, d: int) -> ProjectionMatrix:
    """Materialize ``spec`` for ``d`` input features, deterministically per seed.

    Matrix methods accept any ``k >= 1`` (including ``k > d``);
    ``feature_select`` needs ``k <= d``.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if spec.method == "none":
        return ProjectionMatrix("none", d, d, spec.seed)
    k = default_target_dim(d) if spec.target_dim is None else int(spec.target_dim)
    if k < 1:
        raise ValueError("target_dim must be >= 1")
    gen = RngStream(spec.seed, 0).generator()
    if spec.method == "feature_select":
        if k > d:
            raise ValueError(f"cannot select {k} features out of {d}")
        selected = np.sort(gen.choice(d, size=k, replace=False)).astype(np.int64)
        return ProjectionMatrix("feature_select", d, k, spec.seed, selected=selected)
    if spec.method == "basic":
        W = gen.standard_normal((k, d))
    elif spec.method == "discrete":
        W = gen.integers(0, 2, size=(k, d)).astype(np.float64) * 2.0 - 1.0
    elif spec.method == "circulant":
        W = _circulant(gen, k, d)
    else:
        W = _toeplitz(gen, k, d)
    W.setflags(write=False)
    return ProjectionMatrix(spec.method, d, k, spec.seed, W=W)


def project(x, p: ProjectionMatrix) -> np.ndarray:
    """Apply ``p``: ``(1/sqrt(k)) X W^T`` for matrix methods, column subset otherwise."""
    x = check_matrix(x)
    if x.shape[1] != p.d:
        raise ValueError(f"projection expects {p.d} features, got {x.shape[1]}")
    if p.method == "none":
        return x
    if p.method == "feature_select":
        return np.ascontiguousarray(x[:, p.selected])
    return (x @ p.W.T) / math.sqrt(p.k)


@dataclass(frozen=True)
class DistortionReport:
    epsilon: float
    fraction_within: float
    min_ratio: float
    max_ratio: float


def distortion_report(x, p: ProjectionMatrix, epsilon: float) -> DistortionReport:
    """Brute-force check of pairwise squared-distance preservation within ``1 +- epsilon``."""
    if p.method not in MATRIX_METHODS:
        raise ValueError("distortion_report needs a matrix projection")
    x = check_matrix(x, min_rows=2)
    iu = np.triu_indices(x.shape[0], 1)
    orig = pairwise_sq_dists(x)[iu]
    proj = pairwise_sq_dists(project(x, p))[iu]
    keep = orig > 0
    if not keep.any():
        raise ValueError("all pairs coincide; distortion undefined")
    ratio = proj[keep] / orig[keep]
    within = (ratio >= 1.0 - epsilon) & (ratio <= 1.0 + epsilon)
    return DistortionReport(epsilon, float(within.mean()), float(ratio.min()), float(ratio.max()))


def resolve_projection(method: str, d: int, target_dim: int | None, seed: int) -> ProjectionSpec:
    """Apply the auto-disable policy: tiny or non-reducing projections become ``none``."""
    if method == "none":
        return ProjectionSpec("none", None, seed)
    k = default_target_dim(d) if target_dim is None else int(target_dim)
    if d < 3 or k >= d:
        logger.warning("projection %s disabled for d=%d, k=%d (no reduction possible)", method, d, k)
        return ProjectionSpec("none", None, seed)
    return ProjectionSpec(method, k, seed)


class JLProjector(TransformerMixin, BaseEstimator):
    """Random projection transformer.

    Parameters
    ----------
    method : str, default='toeplitz'
        One of 'basic', 'discrete', 'circulant', 'toeplitz',
        'feature_select' or 'none'.
    n_components : int, optional
        Target dimension k. Defaults to ``ceil(2d/3)``, or to the JL bound when
        ``eps`` is given.
    eps : float, optional
        Distortion tolerance used to derive ``n_components`` from the sample count.
    random_state : int, default=0
    """

    def __init__(self, method="toeplitz", n_components=None, eps=None, random_state=0):
        self.method = method
        self.n_components = n_components
        self.eps = eps
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_matrix(X)
        k = self.n_components
        if k is None and self.eps is not None:
            k = jl_target_dim(max(2, X.shape[0]), self.eps)
        self.projection_ = make_projection(ProjectionSpec(self.method, k, int(self.random_state)), X.shape[1])
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "projection_")
        return project(X, self.projection_)
