"""``odaccel`` command line: fit, predict, bench, cost-train.

Configs are JSON documents validated against ``CONFIG_SCHEMA`` before any
work starts; unknown keys are rejected. The default seed is 0 unless the
``ODACCEL_SEED`` environment variable or the config's ``seed`` says otherwise
(the config wins).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import jsonschema

from . import bench
from .approximation import RandomForestConfig
from .bundle import load_bundle, load_cost_predictor, save_bundle, save_cost_predictor
from .combination import combine
from .core import RngStream, derive_seed, load_csv, precision_at_n, roc_auc, write_scores_csv
from .detectors.pool import KINDS
from .pipeline import SUOD
from .projection import METHODS
from .scheduling import train_cost_predictor, write_timing_csv

logger = logging.getLogger("odaccel")

SEED_ENV = "ODACCEL_SEED"

_INT = {"type": "integer"}
_NUM = {"type": "number"}
_BOOL = {"type": "boolean"}
_STR = {"type": "string"}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False, "required": list(required)}


_GRID = {"type": "object", "additionalProperties": {"type": "object", "additionalProperties": {"type": "array"}}}

CONFIG_SCHEMA = _obj({
    "seed": {"type": "integer", "minimum": 0},
    "data": _obj({
        "train": _STR,
        "test": _STR,
        "label_column": {"type": ["string", "null"]},
        "train_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "synthetic": _obj({"n_inliers": {"type": "integer", "minimum": 1},
                           "n_outliers": {"type": "integer", "minimum": 1},
                           "d": {"type": "integer", "minimum": 1}}),
    }),
    "models": {"type": "array", "minItems": 1, "items": _obj({
        "kind": {"enum": list(KINDS)},
        "hyperparams": {"type": "object"},
        "seed": _INT,
    }, required=["kind"])},
    "grid": _GRID,
    "projection": _obj({
        "enabled": _BOOL,
        "method": {"enum": list(METHODS)},
        "target_dim": {"type": ["integer", "null"], "minimum": 1},
        "flags": {"type": ["array", "null"], "items": _BOOL},
    }),
    "approximation": _obj({
        "enabled": _BOOL,
        "costly_kinds": {"type": ["array", "null"], "items": {"enum": list(KINDS)}},
        "forest": _obj({
            "n_trees": {"type": "integer", "minimum": 1},
            "max_depth": {"type": ["integer", "null"], "minimum": 1},
            "min_samples_split": {"type": "integer", "minimum": 2},
            "features_per_split": {"type": ["integer", "null"], "minimum": 1},
            "bootstrap": _BOOL,
            "seed": _INT,
        }),
    }),
    "scheduling": _obj({
        "enabled": _BOOL,
        "n_jobs": {"type": "integer", "minimum": 1},
        "alpha": {"type": "number", "minimum": 0},
        "cost_predictor": {"type": ["string", "null"]},
    }),
    "combination": _obj({
        "method": {"enum": ["average", "max", "moa"]},
        "bucket_size": {"type": "integer", "minimum": 1},
        "standardize": _BOOL,
    }),
    "benchmark": _obj({
        "name": _STR,
        "trials": {"type": "integer", "minimum": 1},
        "metrics": {"type": "array", "items": {"enum": ["roc", "p@n"]}},
        "methods": {"type": "array", "items": {"enum": list(bench.PROJECTION_ROWS)}},
        "m": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "t": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "simulate_costs": _BOOL,
        "cost_distribution": _obj({"family": {"enum": ["lognormal", "pareto"]}, "shape": _NUM}),
    }),
    "cost_grid": _obj({
        "kinds": _GRID,
        "sizes": {"type": "array", "minItems": 1,
                  "items": {"type": "array", "items": {"type": "integer", "minimum": 2},
                            "minItems": 2, "maxItems": 2}},
        "repeats": {"type": "integer", "minimum": 1},
        "phases": {"type": "array", "items": {"enum": ["fit", "predict"]}, "minItems": 1},
        "forest": {"$ref": "#/properties/approximation/properties/forest"},
    }, required=["kinds", "sizes"]),
})


class ConfigError(ValueError):
    pass


def _where(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def load_config(path) -> dict:
    """Parse and validate a JSON config; errors name the offending key."""
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            raise ConfigError(f"{path}: unknown key {extra[0]!r} in {_where(err)}")
        raise ConfigError(f"{path}: {_where(err)}: {err.message}")
    return cfg


def resolve_seed(cfg: dict) -> int:
    if "seed" in cfg:
        return cfg["seed"]
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        seed = int(env)
    except ValueError:
        raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None
    if seed < 0:
        raise ConfigError(f"{SEED_ENV} must be >= 0")
    return seed


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.6g}" if isinstance(v, float) else v for v in row])


def _has_column(path, name) -> bool:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    return name in [h.strip() for h in header]


# -- commands ---------------------------------------------------------------

def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    seed = resolve_seed(cfg)
    label = cfg.get("data", {}).get("label_column")
    ds = load_csv(args.data, label)
    kw = bench.suod_kwargs(cfg, seed)
    path = cfg.get("scheduling", {}).get("cost_predictor")
    if path:
        kw["cost_predictor"] = load_cost_predictor(path)
    clf = SUOD(bench.pool_from_config(cfg, seed), **kw)
    t0 = time.perf_counter()
    clf.fit(ds.features)
    wall = time.perf_counter() - t0
    save_bundle(clf, args.out)
    s = clf.summary()
    rp = "on" if s["projected"] else "off"
    print(f"projection: {rp} ({s['projected']}/{s['models']} models, method={clf.rp_method})")
    print(f"approximation: {s['approximated']}/{s['models']} models approximated")
    print(f"scheduling: {s['schedule']} t={s['workers']} imbalance={s['assignment_imbalance']:.4g}")
    print(f"wall_time: {wall:.3f}s")
    return 0


def cmd_predict(args) -> int:
    predictor = load_cost_predictor(args.cost_predictor) if args.cost_predictor else None
    clf = load_bundle(args.bundle, n_jobs=args.n_jobs, cost_predictor=predictor)
    label = args.label_column
    if label is None and _has_column(args.data, "label"):
        label = "label"
    ds = load_csv(args.data, label)
    mat = clf.score_matrix(ds.features)
    method = args.combine or clf.combination
    bucket = args.bucket_size if args.bucket_size is not None else int(clf.bucket_size)
    rng = RngStream(derive_seed(int(clf.random_state), 1 << 32), 0)
    scores = combine(mat, method, bucket, rng, bool(clf.standardize))
    write_scores_csv(args.out, scores)
    if ds.labels is not None:
        print(f"roc={roc_auc(scores, ds.labels):.6f} p@n={precision_at_n(scores, ds.labels):.6f}")
    return 0


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    name = cfg.get("benchmark", {}).get("name")
    if name not in bench.BENCHMARKS:
        raise ConfigError(f"unknown benchmark {name!r}; expected one of {', '.join(bench.BENCHMARKS)}")
    if "data" not in cfg and not (name == "bps-compare" and (args.simulate_costs or
                                                             cfg["benchmark"].get("simulate_costs"))):
        raise ConfigError(f"benchmark {name} needs a data section")
    header, rows = bench.run_benchmark(cfg, resolve_seed(cfg), simulate=args.simulate_costs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"{name}.csv"
    _write_csv(target, header, rows)
    print(f"wrote {target} ({len(rows)} rows)")
    return 0


def cmd_cost_train(args) -> int:
    cfg = load_config(args.config)
    if "cost_grid" not in cfg:
        raise ConfigError(f"{args.config}: cost-train needs a cost_grid section")
    grid = cfg["cost_grid"]
    if len(grid["kinds"]) < 2:
        raise ConfigError("cost grid must span at least two detector kinds")
    seed = resolve_seed(cfg)
    records = bench.collect_timings(grid, seed, args.simulate_costs, grid.get("repeats", 10),
                                    tuple(grid.get("phases", ["fit", "predict"])))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_timing_csv(out / "timings.csv", records)
    forest = RandomForestConfig(**({"seed": seed} | grid.get("forest", {})))
    predictor = train_cost_predictor(records, forest)
    save_cost_predictor(predictor, out)
    rho = predictor.holdout_spearman
    print(f"spearman={'nan' if rho is None else f'{rho:.6f}'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odaccel", description="Accelerated outlier-detector ensembles.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit an ensemble and write a bundle")
    p.add_argument("config")
    p.add_argument("data", help="training CSV with a header row")
    p.add_argument("out", help="bundle directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="score a CSV with a saved bundle")
    p.add_argument("bundle")
    p.add_argument("data")
    p.add_argument("out", help="scores CSV")
    p.add_argument("--combine", choices=["average", "max", "moa"])
    p.add_argument("--bucket-size", type=int)
    p.add_argument("--label-column", help="label column (default: 'label' when present)")
    p.add_argument("--n-jobs", type=int, default=1)
    p.add_argument("--cost-predictor", help="predictor directory for balanced scoring")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", help="run a benchmark protocol and write CSV tables")
    p.add_argument("config")
    p.add_argument("out", help="output directory")
    p.add_argument("--simulate-costs", action="store_true", help="replace wall time by the cost-law model")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("cost-train", help="time a grid of detectors and train a cost predictor")
    p.add_argument("config")
    p.add_argument("out", help="predictor directory")
    p.add_argument("--simulate-costs", action="store_true", help="replace wall time by the cost-law model")
    p.set_defaults(func=cmd_cost_train)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
