"""Score-matrix combination rules."""

from __future__ import annotations

import math

import numpy as np

from .core import RngStream, check_matrix, zscore_columns


def _prepare(scores, standardize):
    s = check_matrix(scores, "scores")
    if standardize:
        if s.shape[0] < 2:
            raise ValueError("standardized combination needs at least two samples")
        return zscore_columns(s)
    return s


def _row_mean(s, cols):
    # fixed left-to-right order so a single full bucket equals the plain average bit for bit
    acc = s[:, cols[0]].copy()
    for c in cols[1:]:
        acc += s[:, c]
    return acc / len(cols)


def combine_average(scores, standardize: bool = True) -> np.ndarray:
    s = _prepare(scores, standardize)
    return _row_mean(s, range(s.shape[1]))


def combine_max(scores, standardize: bool = True) -> np.ndarray:
    return _prepare(scores, standardize).max(axis=1)


def moa_buckets(m: int, bucket_size: int, rng: RngStream) -> list[np.ndarray]:
    """Random disjoint column buckets; indices inside each bucket are sorted."""
    if not 1 <= bucket_size <= m:
        raise ValueError(f"bucket_size must be in [1, {m}], got {bucket_size}")
    perm = rng.generator().permutation(m)
    n_buckets = math.ceil(m / bucket_size)
    return [np.sort(perm[b * bucket_size:(b + 1) * bucket_size]) for b in range(n_buckets)]


def combine_moa(scores, bucket_size: int = 5, rng: RngStream | None = None, standardize: bool = True) -> np.ndarray:
    """Maximum over random buckets of the within-bucket average."""
    s = _prepare(scores, standardize)
    rng = RngStream(0) if rng is None else rng
    buckets = moa_buckets(s.shape[1], bucket_size, rng)
    return np.column_stack([_row_mean(s, b) for b in buckets]).max(axis=1)


def combine(scores, method: str = "average", bucket_size: int = 5, rng: RngStream | None = None,
            standardize: bool = True) -> np.ndarray:
    if method == "average":
        return combine_average(scores, standardize)
    if method == "max":
        return combine_max(scores, standardize)
    if method == "moa":
        m = np.shape(scores)[1]
        return combine_moa(scores, min(bucket_size, m), rng, standardize)
    raise ValueError(f"unknown combination {method!r}; expected average, max or moa")
