"""Shared data model: validation, randomness, datasets and evaluation metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "RngStream",
    "LabeledDataset",
    "check_matrix",
    "derive_seed",
    "load_csv",
    "write_scores_csv",
    "make_synthetic",
    "train_test_split",
    "zscore_columns",
    "roc_auc",
    "precision_at_n",
    "spearman_rho",
    "pairwise_sq_dists",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    The underlying generator is PCG64 fed through a SeedSequence whose
    spawn key is the stream id, so draws do not depend on the platform or on
    how many workers are running.
    """

    seed: int = 0
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed) & _MASK64, spawn_key=(int(self.stream_id) & _MASK64,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(derive_seed(self.seed, self.stream_id), stream_id)


def derive_seed(seed: int, index: int) -> int:
    """Deterministic 64-bit seed for item ``index`` under a parent ``seed``."""
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=(int(index) & _MASK64,))
    lo, hi = (int(v) for v in ss.generate_state(2, dtype=np.uint32))
    return (hi << 32) | lo


def check_matrix(x, name: str = "X", min_rows: int = 1) -> np.ndarray:
    """Validate and return a C-contiguous float64 2-D array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_rows:
        raise ValueError(f"{name} needs at least {min_rows} row(s), got {arr.shape[0]}")
    if arr.shape[1] < 1:
        raise ValueError(f"{name} needs at least one column")
    if not np.all(np.isfinite(arr)):
        r, c = np.argwhere(~np.isfinite(arr))[0]
        raise ValueError(f"{name} contains a non-finite value at row {r}, column {c}")
    return np.ascontiguousarray(arr)


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "features", check_matrix(self.features, "features"))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64).ravel()
            if labels.shape[0] != self.features.shape[0]:
                raise ValueError("labels length does not match the number of feature rows")
            if not np.all((labels == 0) | (labels == 1)):
                raise ValueError("labels must be 0 or 1")
            object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]


def load_csv(path, label_column: str | None = None) -> LabeledDataset:
    """Read a headered CSV of decimal floats, optionally splitting off a 0/1 label column."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file, a header row is required") from None
        if label_column is not None and label_column not in header:
            raise ValueError(f"{path}: label column {label_column!r} not found in header")
        label_idx = header.index(label_column) if label_column is not None else None
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
            values = []
            for j, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise ValueError(f"{path}: row {lineno}, column {header[j]!r}: cannot parse {cell!r}") from None
                if not math.isfinite(v):
                    raise ValueError(f"{path}: row {lineno}, column {header[j]!r}: non-finite value {cell!r}")
                if j == label_idx:
                    if v not in (0.0, 1.0):
                        raise ValueError(f"{path}: row {lineno}: label must be 0 or 1, got {cell!r}")
                    labels.append(int(v))
                else:
                    values.append(v)
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return LabeledDataset(np.array(rows, dtype=np.float64), np.array(labels) if label_idx is not None else None)


def write_scores_csv(path, scores) -> None:
    scores = np.asarray(scores, dtype=np.float64).ravel()
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "score"])
        for i, s in enumerate(scores):
            w.writerow([i, repr(float(s))])


def make_synthetic(n_inliers: int, n_outliers: int, d: int, rng: RngStream) -> LabeledDataset:
    """Uniform[-4, 4]^d inliers followed by N(0, 3^2) outliers."""
    if n_inliers < 1 or n_outliers < 1 or d < 1:
        raise ValueError("n_inliers, n_outliers and d must all be >= 1")
    gen = rng.generator()
    inliers = gen.uniform(-4.0, 4.0, size=(n_inliers, d))
    outliers = gen.normal(0.0, 3.0, size=(n_outliers, d))
    labels = np.r_[np.zeros(n_inliers, dtype=np.int64), np.ones(n_outliers, dtype=np.int64)]
    return LabeledDataset(np.vstack([inliers, outliers]), labels)


def train_test_split(ds: LabeledDataset, train_fraction: float, rng: RngStream):
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    n = ds.n_samples
    n_train = int(math.floor(n * train_fraction))
    if n_train < 1 or n_train >= n:
        raise ValueError(f"split of {n} rows at {train_fraction} leaves an empty side")
    perm = rng.generator().permutation(n)
    tr, te = perm[:n_train], perm[n_train:]
    lab = ds.labels
    return (
        LabeledDataset(ds.features[tr], None if lab is None else lab[tr]),
        LabeledDataset(ds.features[te], None if lab is None else lab[te]),
    )


def zscore_columns(m) -> np.ndarray:
    """Standardize columns with the population standard deviation; constant columns become 0."""
    m = check_matrix(m, "m", min_rows=2)
    mean = m.mean(axis=0)
    std = m.std(axis=0)
    centered = m - mean
    out = np.zeros_like(m)
    # exact range check: rounding can give a constant column a tiny nonzero std
    ok = (std > 0) & (np.ptp(m, axis=0) > 0)
    out[:, ok] = centered[:, ok] / std[ok]
    return out


def _check_labels(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(np.int64)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    return scores, labels


def _average_ranks(a: np.ndarray) -> np.ndarray:
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    # boundaries of tie groups
    starts = np.r_[0, np.flatnonzero(np.diff(sorted_a)) + 1]
    ends = np.r_[starts[1:], a.size]
    avg = (starts + ends + 1) / 2.0  # 1-based mean rank of each group
    ranks = np.empty(a.size, dtype=np.float64)
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def roc_auc(scores, labels) -> float:
    """ROC AUC via the Mann-Whitney rank-sum statistic (ties count one half)."""
    scores, labels = _check_labels(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes present")
    ranks = _average_ranks(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def precision_at_n(scores, labels) -> float:
    """Precision among the top-n scores, n being the number of true outliers."""
    scores, labels = _check_labels(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("precision_at_n needs at least one positive label")
    # stable sort on -score keeps lower indices first among ties
    top = np.argsort(-scores, kind="stable")[:n_pos]
    return float(labels[top].sum() / n_pos)


def spearman_rho(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape or a.size < 2:
        raise ValueError("spearman_rho needs two sequences of equal length >= 2")
    ra, rb = _average_ranks(a), _average_ranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    va, vb = np.dot(ra, ra), np.dot(rb, rb)
    if va == 0 or vb == 0:
        raise ValueError("spearman_rho undefined: a sequence has zero rank variance")
    return float(np.clip(np.dot(ra, rb) / math.sqrt(va * vb), -1.0, 1.0))


def _block_rows(n_other: int, d: int, budget: int = 1 << 21) -> int:
    return max(1, budget // max(1, n_other * d))


def pairwise_sq_dists(m, other=None) -> np.ndarray:
    """Squared Euclidean distances computed from explicit differences.

    Avoids the ``|a|^2 + |b|^2 - 2ab`` expansion so that identical rows give
    exactly zero and results agree with a naive loop.
    """
    a = check_matrix(m, "m")
    b = a if other is None else check_matrix(other, "other")
    if a.shape[1] != b.shape[1]:
        raise ValueError("dimension mismatch")
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    step = _block_rows(b.shape[0], a.shape[1])
    for i in range(0, a.shape[0], step):
        diff = a[i:i + step, None, :] - b[None, :, :]
        # accumulate coordinates left to right, like a plain loop would
        acc = diff[:, :, 0] ** 2
        for c in range(1, a.shape[1]):
            acc += diff[:, :, c] ** 2
        out[i:i + step] = acc
    return out
