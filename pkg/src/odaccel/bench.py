"""Benchmark protocols behind ``odaccel bench`` and ``odaccel cost-train``.

Each protocol returns a header and rows; the CLI writes them as CSV.
Wall-clock columns use ``time.perf_counter`` rounded to milliseconds.
"""

from __future__ import annotations

import math
import time
from typing import Callable

import numpy as np

from .approximation import RandomForestConfig
from .core import (
    LabeledDataset,
    RngStream,
    derive_seed,
    load_csv,
    make_synthetic,
    precision_at_n,
    roc_auc,
    train_test_split,
)
from .detectors.pool import ModelSpec, generate_model_pool
from .pipeline import SUOD
from .scheduling import (
    TimingRecord,
    balanced_assign,
    generic_assign,
    makespan,
    schedule_weights,
)

BENCHMARKS = ("projection-compare", "psa-compare", "bps-compare", "full-system")

PROJECTION_HEADER = ["method", "time-seconds", "roc", "p@n"]
PSA_HEADER = ["model", "kind", "orig_roc", "appr_roc", "orig_p@n", "appr_p@n"]
BPS_HEADER = ["m", "t", "Generic", "BPS", "Redu%"]
FULL_HEADER = ["metric", "Fit_B", "Fit_S", "Pred_B", "Pred_S", "Avg_B", "Avg_S", "MOA_B", "MOA_S"]

# Table-1 row labels mapped to projection methods
PROJECTION_ROWS = {
    "original": "none",
    "RS": "feature_select",
    "basic": "basic",
    "discrete": "discrete",
    "circulant": "circulant",
    "toeplitz": "toeplitz",
}

METRICS = {"roc": roc_auc, "p@n": precision_at_n}


def default_pool() -> list[ModelSpec]:
    """Twenty detectors covering every kind with varied hyperparameters."""
    raw = [
        ("knn", {"n_neighbors": 5}), ("knn", {"n_neighbors": 10, "method": "mean"}),
        ("knn", {"n_neighbors": 20, "method": "median"}), ("knn", {"n_neighbors": 50}),
        ("avg_knn", {"n_neighbors": 10}), ("avg_knn", {"n_neighbors": 25}),
        ("lof", {"n_neighbors": 10}), ("lof", {"n_neighbors": 20, "metric": "manhattan"}),
        ("lof", {"n_neighbors": 25, "metric": "minkowski", "p": 3}), ("lof", {"n_neighbors": 50}),
        ("hbos", {"n_histograms": 10, "tolerance": 0.1}), ("hbos", {"n_histograms": 20, "tolerance": 0.2}),
        ("hbos", {"n_histograms": 50, "tolerance": 0.5}),
        ("iforest", {"n_estimators": 50, "max_features": 0.5}),
        ("iforest", {"n_estimators": 100, "max_features": 0.8}),
        ("iforest", {"n_estimators": 100, "max_features": 1.0}),
        ("abod", {"n_neighbors": 10}), ("abod", {"n_neighbors": 20}),
        ("feature_bagging", {"n_estimators": 10, "n_neighbors": 10}),
        ("feature_bagging", {"n_estimators": 20, "n_neighbors": 20}),
    ]
    return [ModelSpec(kind, hp, seed=i) for i, (kind, hp) in enumerate(raw)]


# -- shared plumbing ----------------------------------------------------------

def _clock(fn: Callable[[], object]):
    t0 = time.perf_counter()
    out = fn()
    return out, round(time.perf_counter() - t0, 3)


def load_datasets(data: dict, seed: int, trial: int = 0) -> tuple[LabeledDataset, LabeledDataset | None]:
    """Train and (optional) test sets described by a config ``data`` section."""
    if "synthetic" in data:
        syn = data["synthetic"]
        ds = make_synthetic(syn.get("n_inliers", 160), syn.get("n_outliers", 40), syn.get("d", 2),
                            RngStream(seed, trial))
    else:
        ds = load_csv(data["train"], data.get("label_column"))
    if "test" in data:
        return ds, load_csv(data["test"], data.get("label_column"))
    frac = data.get("train_fraction")
    if frac is not None and frac < 1:
        return train_test_split(ds, frac, RngStream(seed, trial).child(1))
    return ds, None


def _need_labels(ds: LabeledDataset, what: str):
    if ds.labels is None:
        raise ValueError(f"{what} needs labeled data (set data.label_column)")
    return ds.labels


def _metrics(scores, labels, names) -> dict[str, float]:
    return {name: METRICS[name](scores, labels) for name in names}


def pool_from_config(cfg: dict, seed: int) -> list[ModelSpec]:
    if "models" in cfg:
        return [ModelSpec.from_dict(m) for m in cfg["models"]]
    if "grid" in cfg:
        return generate_model_pool(cfg["grid"], RngStream(seed))
    return default_pool()


def suod_kwargs(cfg: dict, seed: int) -> dict:
    """SUOD constructor arguments from the config's module sections."""
    proj = cfg.get("projection", {})
    apx = cfg.get("approximation", {})
    sched = cfg.get("scheduling", {})
    comb = cfg.get("combination", {})
    forest = apx.get("forest")
    return {
        "rp_flag_global": proj.get("enabled", True),
        "rp_flags": proj.get("flags"),
        "rp_method": proj.get("method", "toeplitz"),
        "target_dim": proj.get("target_dim"),
        "approx_flag_global": apx.get("enabled", True),
        "costly_kinds": apx.get("costly_kinds"),
        "approx_config": None if forest is None else RandomForestConfig(**forest),
        "bps_flag": sched.get("enabled", True),
        "n_jobs": sched.get("n_jobs", 1),
        "alpha": sched.get("alpha", 1.0),
        "combination": comb.get("method", "average"),
        "bucket_size": comb.get("bucket_size", 5),
        "standardize": comb.get("standardize", True),
        "random_state": seed,
    }


def _mean_rows(per_trial: list[list[list]], n_key: int) -> list[list]:
    """Average numeric columns of row-aligned tables; first ``n_key`` columns are labels."""
    out = []
    for rows in zip(*per_trial):
        key = list(rows[0][:n_key])
        vals = np.array([r[n_key:] for r in rows], dtype=np.float64).mean(axis=0)
        out.append(key + [float(v) for v in vals])
    return out


# -- protocols ------------------------------------------------------------------

def projection_compare(cfg: dict, seed: int) -> tuple[list[str], list[list]]:
    """Fit the pool on projected data for every method; score the evaluation rows."""
    bench = cfg.get("benchmark", {})
    rows_wanted = bench.get("methods", list(PROJECTION_ROWS))
    specs = pool_from_config(cfg, seed)
    per_trial = []
    for trial in range(bench.get("trials", 1)):
        train, test = load_datasets(cfg["data"], seed, trial)
        rows = []
        for label in rows_wanted:
            method = PROJECTION_ROWS[label]
            kw = suod_kwargs(cfg, seed) | {
                "rp_flags": [method != "none"] * len(specs),
                "rp_method": "toeplitz" if method == "none" else method,
                "approx_flag_global": False,
                "combination": "average",
            }
            clf = SUOD(specs, **kw)

            def run():
                clf.fit(train.features)
                return clf.decision_scores_ if test is None else clf.decision_function(test.features)

            scores, secs = _clock(run)
            labels = _need_labels(train if test is None else test, "projection-compare")
            m = _metrics(scores, labels, ("roc", "p@n"))
            rows.append([label, secs, m["roc"], m["p@n"]])
        per_trial.append(rows)
    return PROJECTION_HEADER, _mean_rows(per_trial, 1)


def psa_compare(cfg: dict, seed: int) -> tuple[list[str], list[list]]:
    """Held-out quality of each costly detector versus its forest approximator."""
    bench = cfg.get("benchmark", {})
    specs = pool_from_config(cfg, seed)
    per_trial = []
    for trial in range(bench.get("trials", 1)):
        train, test = load_datasets(cfg["data"], seed, trial)
        if test is None:
            raise ValueError("psa-compare needs held-out data (data.train_fraction < 1 or data.test)")
        labels = _need_labels(test, "psa-compare")
        kw = suod_kwargs(cfg, seed) | {"rp_flag_global": False, "rp_flags": None, "approx_flag_global": True}
        clf = SUOD(specs, **kw).fit(train.features)
        approx = clf.score_matrix(test.features)
        orig = clf.strip_approximators().score_matrix(test.features)
        rows = []
        for i, mem in enumerate(clf.members_):
            if mem.approximator is None:
                continue
            o = _metrics(orig[:, i], labels, ("roc", "p@n"))
            a = _metrics(approx[:, i], labels, ("roc", "p@n"))
            rows.append([i, mem.spec.kind, o["roc"], a["roc"], o["p@n"], a["p@n"]])
        per_trial.append(rows)
    return PSA_HEADER, _mean_rows(per_trial, 2)


def heavy_tailed_costs(m: int, gen: np.random.Generator, family: str = "lognormal", shape: float = 2.0) -> np.ndarray:
    if family == "lognormal":
        return gen.lognormal(0.0, shape, m)
    if family == "pareto":
        return gen.pareto(shape, m) + 1.0
    raise ValueError(f"unknown cost distribution {family!r}")


def simulated_makespans(costs, t: int, alpha: float = 1.0) -> tuple[float, float]:
    """(generic, balanced) makespans of true costs, balanced on perfectly ranked costs."""
    generic = makespan(generic_assign(len(costs), t), costs)
    balanced = makespan(balanced_assign(schedule_weights(costs, alpha), t), costs)
    return generic, balanced


def _redu(generic, balanced) -> float:
    return 100.0 * (generic - balanced) / generic


def bps_compare(cfg: dict, seed: int, simulate: bool) -> tuple[list[str], list[list]]:
    bench = cfg.get("benchmark", {})
    trials = bench.get("trials", 10)
    ms = bench.get("m", [100])
    ts = bench.get("t", [4])
    alpha = cfg.get("scheduling", {}).get("alpha", 1.0)
    rows = []
    if simulate:
        dist = bench.get("cost_distribution", {})
        for m in ms:
            for t in ts:
                gen = RngStream(derive_seed(seed, m), t).generator()
                pairs = np.array([
                    simulated_makespans(heavy_tailed_costs(m, gen, dist.get("family", "lognormal"),
                                                           dist.get("shape", 2.0)), t, alpha)
                    for _ in range(trials)
                ])
                g, b = pairs.mean(axis=0)
                rows.append([m, t, float(g), float(b), _redu(g, b)])
        return BPS_HEADER, rows

    from .bundle import load_cost_predictor

    path = cfg.get("scheduling", {}).get("cost_predictor")
    if not path:
        raise ValueError("bps-compare with wall-clock timing needs scheduling.cost_predictor")
    predictor = load_cost_predictor(path)
    grid = cfg.get("grid")
    if grid is None:
        raise ValueError("bps-compare with wall-clock timing needs a model grid")
    for m in ms:
        for t in ts:
            times = {False: [], True: []}
            for trial in range(trials):
                train, _ = load_datasets(cfg["data"], seed, trial)
                specs = generate_model_pool(grid, RngStream(seed, trial))
                specs = [specs[i % len(specs)] for i in range(m)]
                for bps in (False, True):
                    kw = suod_kwargs(cfg, seed) | {"bps_flag": bps, "n_jobs": t, "cost_predictor": predictor,
                                                   "rp_flag_global": False, "approx_flag_global": False}
                    _, secs = _clock(lambda: SUOD(specs, **kw).fit(train.features))
                    times[bps].append(secs)
            g, b = float(np.mean(times[False])), float(np.mean(times[True]))
            rows.append([m, t, round(g, 3), round(b, 3), _redu(g, b)])
    return BPS_HEADER, rows


def full_system(cfg: dict, seed: int) -> tuple[list[str], list[list]]:
    """Baseline (all modules off) against the configured pipeline."""
    bench = cfg.get("benchmark", {})
    names = bench.get("metrics", ["roc", "p@n"])
    specs = pool_from_config(cfg, seed)
    predictor = None
    path = cfg.get("scheduling", {}).get("cost_predictor")
    if path:
        from .bundle import load_cost_predictor

        predictor = load_cost_predictor(path)
    per_trial = []
    for trial in range(bench.get("trials", 1)):
        train, test = load_datasets(cfg["data"], seed, trial)
        if test is None:
            raise ValueError("full-system needs held-out data (data.train_fraction < 1 or data.test)")
        labels = _need_labels(test, "full-system")
        on = suod_kwargs(cfg, seed) | {"cost_predictor": predictor}
        off = on | {"rp_flag_global": False, "rp_flags": None, "approx_flag_global": False, "bps_flag": False}
        cols = {}
        for tag, kw in (("B", off), ("S", on)):
            clf = SUOD(specs, **kw)
            _, cols[f"Fit_{tag}"] = _clock(lambda: clf.fit(train.features))
            mat, cols[f"Pred_{tag}"] = _clock(lambda: clf.score_matrix(test.features))
            avg = SUOD(specs, **(kw | {"combination": "average"}))._combine(mat)
            moa = SUOD(specs, **(kw | {"combination": "moa"}))._combine(mat)
            cols[f"Avg_{tag}"] = _metrics(avg, labels, names)
            cols[f"MOA_{tag}"] = _metrics(moa, labels, names)
        per_trial.append([
            [name] + [cols[h] if h.startswith(("Fit", "Pred")) else cols[h][name] for h in FULL_HEADER[1:]]
            for name in names
        ])
    return FULL_HEADER, _mean_rows(per_trial, 1)


def run_benchmark(cfg: dict, seed: int, simulate: bool = False) -> tuple[list[str], list[list]]:
    name = cfg.get("benchmark", {}).get("name")
    if name == "projection-compare":
        return projection_compare(cfg, seed)
    if name == "psa-compare":
        return psa_compare(cfg, seed)
    if name == "bps-compare":
        return bps_compare(cfg, seed, simulate or cfg["benchmark"].get("simulate_costs", False))
    if name == "full-system":
        return full_system(cfg, seed)
    raise ValueError(f"unknown benchmark {name!r}; expected one of {BENCHMARKS}")


# -- timing records -------------------------------------------------------------

# relative cost per unit of work, simulated seconds
_COST_LAW = {
    "knn": 2e-9, "avg_knn": 2e-9, "lof": 4e-9, "abod": 3e-9,
    "feature_bagging": 2e-9, "hbos": 5e-8, "iforest": 1e-7,
}


def _work(spec: ModelSpec, n: int, d: int, phase: str) -> float:
    hp = spec.hyperparams
    if spec.kind in ("knn", "avg_knn", "lof"):
        return n * n * d
    if spec.kind == "abod":
        k = hp.get("n_neighbors", 10)
        return n * n * d + n * k * k * d
    if spec.kind == "feature_bagging":
        return hp.get("n_estimators", 10) * n * n * max(1, d // 2)
    if spec.kind == "hbos":
        return n * d * (1 if phase == "predict" else math.log2(max(n, 2)))
    if spec.kind == "iforest":
        psi = min(hp.get("max_samples", 256), n)
        return hp.get("n_estimators", 100) * (psi * math.log2(max(psi, 2)) + n * math.log2(max(psi, 2)))
    raise ValueError(f"no cost law for kind {spec.kind!r}")


def simulated_seconds(spec: ModelSpec, n: int, d: int, phase: str, gen: np.random.Generator,
                      noise: float = 0.2) -> float:
    """Deterministic stand-in for wall time: work x kind constant x lognormal noise."""
    return _COST_LAW[spec.kind] * _work(spec, n, d, phase) * float(np.exp(gen.normal(0.0, noise)))


def collect_timings(grid: dict, seed: int, simulate: bool, repeats: int = 10,
                    phases=("fit", "predict")) -> list[TimingRecord]:
    """One record per (model, size, phase); seconds are summed over ``repeats`` runs."""
    specs = generate_model_pool(grid["kinds"], RngStream(seed))
    if len({s.kind for s in specs}) < 2:
        raise ValueError("cost grid must span at least two detector kinds")
    gen = RngStream(seed, 1).generator()
    records = []
    for n, d in grid["sizes"]:
        data = make_synthetic(n - n // 10, n // 10, d, RngStream(seed, 2)).features
        for spec in specs:
            for phase in phases:
                if simulate:
                    secs = sum(simulated_seconds(spec, n, d, phase, gen) for _ in range(repeats))
                else:
                    secs = 0.0
                    for _ in range(repeats):
                        if phase == "fit":
                            _, s = _timed_fit(spec, data)
                        else:
                            model, _ = _timed_fit(spec, data)
                            t0 = time.perf_counter()
                            model.decision_function(data)
                            s = time.perf_counter() - t0
                        secs += s
                    secs = max(secs, 1e-6)
                records.append(TimingRecord(spec, n, d, secs, phase))
    return records


def _timed_fit(spec: ModelSpec, data):
    t0 = time.perf_counter()
    model = spec.build().fit(data)
    return model, time.perf_counter() - t0

