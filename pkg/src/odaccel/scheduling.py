"""Cost prediction and balanced assignment of models to workers."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .approximation import ForestRegressor, RandomForestConfig
from .core import RngStream, spearman_rho
from .detectors.pool import KINDS, ModelSpec

logger = logging.getLogger(__name__)

# numeric hyperparameter slots; aliases map onto one slot
HYPER_SLOTS = ("n_neighbors", "n_estimators", "n_histograms", "max_features")
_ALIASES = {"n_trees": "n_estimators", "n_bins": "n_histograms"}
DERIVED = ("n", "d", "n_d", "n_log_n", "n_sq")
META_NAMES = DERIVED + tuple(f"kind_{k}" for k in KINDS) + HYPER_SLOTS


@dataclass(frozen=True, eq=False)
class MetaFeatures:
    values: np.ndarray
    kind: str

    names = META_NAMES

    def __getitem__(self, name):
        return float(self.values[META_NAMES.index(name)])


def extract_meta(spec: ModelSpec, n: int, d: int) -> MetaFeatures:
    """Fixed-length cost features of fitting/scoring ``spec`` on an n x d matrix."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    vals = dict.fromkeys(META_NAMES, 0.0)
    vals.update(n=n, d=d, n_d=n * d, n_log_n=n * math.log(n), n_sq=float(n) ** 2)
    vals[f"kind_{spec.kind}"] = 1.0
    if spec.kind != "unknown":
        for key, v in spec.hyperparams.items():
            slot = _ALIASES.get(key, key)
            if slot in HYPER_SLOTS and isinstance(v, (int, float)) and not isinstance(v, bool):
                vals[slot] = float(v)
    return MetaFeatures(np.array([vals[k] for k in META_NAMES], dtype=np.float64), spec.kind)


@dataclass(frozen=True)
class TimingRecord:
    spec: ModelSpec
    n: int
    d: int
    seconds: float
    phase: str = "fit"

    def __post_init__(self):
        if not self.seconds > 0:
            raise ValueError("seconds must be > 0")
        if self.phase not in ("fit", "predict"):
            raise ValueError("phase must be 'fit' or 'predict'")

    @property
    def meta(self) -> MetaFeatures:
        return extract_meta(self.spec, self.n, self.d)


TIMING_HEADER = ["kind", "n", "d", *HYPER_SLOTS, "phase", "seconds"]


def write_timing_csv(path, records: Sequence[TimingRecord]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TIMING_HEADER)
        for r in records:
            m = r.meta
            w.writerow([r.spec.kind, r.n, r.d, *(repr(m[s]) for s in HYPER_SLOTS), r.phase, repr(r.seconds)])


def read_timing_csv(path) -> list[TimingRecord]:
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TIMING_HEADER:
            raise ValueError(f"{path}: expected header {TIMING_HEADER}, got {reader.fieldnames}")
        for row in reader:
            hp = {s: float(row[s]) for s in HYPER_SLOTS if float(row[s]) != 0.0}
            out.append(TimingRecord(ModelSpec(row["kind"], hp), int(row["n"]), int(row["d"]),
                                    float(row["seconds"]), row["phase"]))
    return out


@dataclass
class CostPredictor:
    forest: ForestRegressor
    fallback_max: float
    floor: float
    feature_names: tuple = META_NAMES
    holdout_spearman: float | None = None

    def predict(self, meta: MetaFeatures) -> float:
        return predict_cost(self, meta)


def train_cost_predictor(records: Sequence[TimingRecord], cfg: RandomForestConfig | None = None,
                         holdout_fraction: float = 0.2) -> CostPredictor:
    """Fit a forest on log-seconds; reports Spearman rho on a random holdout."""
    records = list(records)
    if len(records) < 20:
        raise ValueError(f"need at least 20 timing records, got {len(records)}")
    if len({r.spec.kind for r in records}) < 2:
        raise ValueError("timing records must span at least two detector kinds")
    cfg = cfg or RandomForestConfig()
    X = np.vstack([r.meta.values for r in records])
    secs = np.array([r.seconds for r in records])
    y = np.log(secs)

    rho = None
    if holdout_fraction:
        perm = RngStream(cfg.seed, 1).generator().permutation(len(records))
        n_hold = max(2, int(round(holdout_fraction * len(records))))
        hold, train = perm[:n_hold], perm[n_hold:]
        probe = ForestRegressor.from_config(cfg).fit(X[train], y[train])
        try:
            rho = spearman_rho(probe.predict(X[hold]), y[hold])
        except ValueError:
            rho = None

    forest = ForestRegressor.from_config(cfg).fit(X, y)
    return CostPredictor(forest, float(secs.max()), float(secs.min()), META_NAMES, rho)


def predict_cost(c: CostPredictor, meta: MetaFeatures) -> float:
    if meta.values.shape[0] != len(c.feature_names):
        raise ValueError(f"meta-feature length {meta.values.shape[0]} != {len(c.feature_names)}")
    if meta.kind == "unknown":
        return c.fallback_max
    return max(float(np.exp(c.forest.predict(meta.values[None, :])[0])), c.floor)


def rank_models(costs) -> np.ndarray:
    """1-based ascending ranks; equal costs keep their original order."""
    costs = np.asarray(costs, dtype=np.float64)
    ranks = np.empty(costs.size, dtype=np.int64)
    ranks[np.argsort(costs, kind="stable")] = np.arange(1, costs.size + 1)
    return ranks


def discounted_rank(f, m: int, alpha: float = 1.0):
    """``1 + alpha * f / m``; works elementwise on arrays of ranks."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    out = 1.0 + alpha * np.asarray(f, dtype=np.float64) / m
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class Assignment:
    worker_of: np.ndarray
    n_workers: int
    loads: np.ndarray = field(default=None)

    def groups(self) -> list[list[int]]:
        return [np.flatnonzero(self.worker_of == w).tolist() for w in range(self.n_workers)]


def _with_loads(worker_of, t, weights):
    loads = np.zeros(t)
    if weights is not None:
        np.add.at(loads, worker_of, np.asarray(weights, dtype=np.float64))
    return Assignment(worker_of, t, loads)


def balanced_assign(weights, t: int) -> Assignment:
    """Longest-processing-time greedy: heaviest first onto the lightest worker."""
    if t < 1:
        raise ValueError("t must be >= 1")
    weights = np.asarray(weights, dtype=np.float64)
    worker_of = np.empty(weights.size, dtype=np.int64)
    loads = np.zeros(t)
    for j in np.argsort(-weights, kind="stable"):
        w = int(np.argmin(loads))  # first minimum -> lowest worker id
        worker_of[j] = w
        loads[w] += weights[j]
    return Assignment(worker_of, t, loads)


def generic_assign(m: int, t: int, weights=None) -> Assignment:
    """Contiguous equal-count chunks in the original order."""
    if t < 1:
        raise ValueError("t must be >= 1")
    sizes = [m // t + (1 if w < m % t else 0) for w in range(t)]
    worker_of = np.repeat(np.arange(t), sizes).astype(np.int64)
    return _with_loads(worker_of, t, weights)


def imbalance(a: Assignment, weights=None) -> float:
    """Sum over workers of the absolute deviation of their load from the mean load."""
    loads = a.loads if weights is None else _with_loads(a.worker_of, a.n_workers, weights).loads
    return float(np.abs(loads - loads.sum() / a.n_workers).sum())


def makespan(a: Assignment, costs) -> float:
    return float(_with_loads(a.worker_of, a.n_workers, costs).loads.max())


def schedule_weights(costs, alpha: float = 1.0, mode: str = "discounted") -> np.ndarray:
    """Scheduling weight per model from predicted costs."""
    ranks = rank_models(costs)
    if mode == "raw":
        return ranks.astype(np.float64)
    return discounted_rank(ranks, len(ranks), alpha)


class TaskError(RuntimeError):
    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"task {index} failed: {cause!r}")
        self.index = index


def execute_scheduled(tasks: Sequence[Callable[[], object]], a: Assignment, t: int | None = None) -> list:
    """Run ``tasks`` with each worker handling its assigned indices in order.

    Results come back in task order. A failing task raises ``TaskError``
    carrying its index; remaining work is cancelled best-effort.
    """
    t = a.n_workers if t is None else t
    if len(tasks) != len(a.worker_of):
        raise ValueError("one task per assigned model is required")
    results: list = [None] * len(tasks)
    groups = [np.flatnonzero(a.worker_of == w).tolist() for w in range(t)]
    abort = False

    def run(indices):
        for i in indices:
            if abort:
                return
            try:
                results[i] = tasks[i]()
            except Exception as exc:
                raise TaskError(i, exc) from exc

    if t == 1:
        for g in groups:
            run(g)
        return results
    with ThreadPoolExecutor(max_workers=t) as pool:
        futures = [pool.submit(run, g) for g in groups if g]
        errors = []
        for fut in futures:
            exc = fut.exception()
            if exc is not None:
                abort = True
                errors.append(exc)
    if errors:
        raise min(errors, key=lambda e: getattr(e, "index", 0))
    return results
