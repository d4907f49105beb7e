"""On-disk ensemble bundles.

Layout of a bundle directory::

    manifest            JSON text: format version, config, one entry per model
    blobs/<i>.bin       little-endian float64 arrays of model i, concatenated

Each model entry lists its arrays as ``{"name", "shape", "offset"}`` (offset
in float64 elements) for the detector and, when present, the approximator,
together with the blob's SHA-256. Projection matrices are not stored; they
are regenerated from ``(method, d, k, seed)``.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .approximation import ForestRegressor, RandomForestConfig
from .detectors.pool import ModelSpec
from .pipeline import SUOD, _Member
from .projection import ProjectionSpec, make_projection
from .scheduling import META_NAMES, CostPredictor

FORMAT = "suod-bundle/1"
PREDICTOR_FORMAT = "suod-cost-predictor/1"
_LE = np.dtype("<f8")


class BundleError(ValueError):
    pass


def _pack(state: dict[str, np.ndarray], offset: int):
    layout, chunks = [], []
    for name, arr in state.items():
        arr = np.ascontiguousarray(arr, dtype=_LE)
        layout.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.ravel())
        offset += arr.size
    return layout, chunks, offset


def _unpack(data: np.ndarray, layout) -> dict[str, np.ndarray]:
    out = {}
    for entry in layout:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape, dtype=np.int64)) if shape else 1
        start = entry["offset"]
        if start + size > data.size:
            raise BundleError(f"array {entry['name']} runs past the end of its blob")
        out[entry["name"]] = data[start:start + size].astype(np.float64).reshape(shape)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_manifest(path: Path, expected: str) -> dict:
    try:
        manifest = json.loads((path / "manifest").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise BundleError(f"{path}: no manifest") from None
    version = manifest.get("format")
    if version != expected:
        raise BundleError(f"{path}: unsupported format version {version!r} (this build reads {expected!r})")
    return manifest


def _read_blob(path: Path, rel: str, sha: str) -> np.ndarray:
    raw = (path / rel).read_bytes()
    if hashlib.sha256(raw).hexdigest() != sha:
        raise BundleError(f"{path / rel}: checksum mismatch")
    return np.frombuffer(raw, dtype=_LE)


def save_bundle(clf: SUOD, path) -> Path:
    path = Path(path)
    (path / "blobs").mkdir(parents=True, exist_ok=True)
    models = []
    for i, mem in enumerate(clf.members_):
        det_layout, chunks, offset = _pack(mem.model.get_state(), 0)
        apx_layout = None
        if mem.approximator is not None:
            apx_layout, more, offset = _pack(mem.approximator.get_state(), offset)
            chunks += more
        raw = np.concatenate(chunks).astype(_LE).tobytes() if chunks else b""
        rel = f"blobs/{i}.bin"
        (path / rel).write_bytes(raw)
        models.append({
            "index": i,
            "spec": mem.spec.to_dict(),
            "projection": mem.projection.descriptor(),
            "n_features_in": int(mem.model.n_features_in_),
            "detector_params": mem.model.get_params(),
            "detector_arrays": det_layout,
            "approximator_params": None if mem.approximator is None else mem.approximator.get_params(),
            "approximator_arrays": apx_layout,
            "blob": rel,
            "sha256": hashlib.sha256(raw).hexdigest(),
        })
    manifest = {
        "format": FORMAT,
        "n_features_in": int(clf.n_features_in_),
        "config": clf.config_snapshot(),
        "models": models,
    }
    _write_json(path / "manifest", manifest)
    return path


def load_bundle(path, n_jobs: int = 1, cost_predictor: CostPredictor | None = None) -> SUOD:
    path = Path(path)
    manifest = _read_manifest(path, FORMAT)
    cfg = dict(manifest["config"])
    cfg["approx_config"] = RandomForestConfig(**cfg["approx_config"])
    members = []
    for entry in manifest["models"]:
        data = _read_blob(path, entry["blob"], entry["sha256"])
        spec = ModelSpec.from_dict(entry["spec"])
        p = entry["projection"]
        target = None if p["method"] == "none" else p["k"]
        projection = make_projection(ProjectionSpec(p["method"], target, p["seed"]), p["d"])
        model = type(spec.build())(**entry["detector_params"])
        model.set_state(_unpack(data, entry["detector_arrays"]))
        model.n_features_in_ = entry["n_features_in"]
        approximator = None
        if entry["approximator_arrays"] is not None:
            approximator = ForestRegressor(**entry["approximator_params"])
            approximator.set_state(_unpack(data, entry["approximator_arrays"]))
        members.append(_Member(spec, projection, model, approximator))
    clf = SUOD([m.spec for m in members], n_jobs=n_jobs, cost_predictor=cost_predictor, **cfg)
    clf.members_ = members
    clf.n_features_in_ = manifest["n_features_in"]
    clf.train_scores_ = np.column_stack([m.model.decision_scores_ for m in members])
    clf.decision_scores_ = clf._combine(clf.train_scores_)
    clf.fit_assignment_ = None
    clf.fit_weights_ = None
    return clf


def bundle_bytes(path) -> dict[str, bytes]:
    """All files of a bundle keyed by relative path (for byte-level comparison)."""
    path = Path(path)
    return {str(p.relative_to(path)): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


def save_cost_predictor(c: CostPredictor, path) -> Path:
    path = Path(path)
    (path / "blobs").mkdir(parents=True, exist_ok=True)
    layout, chunks, _ = _pack(c.forest.get_state(), 0)
    raw = np.concatenate(chunks).astype(_LE).tobytes()
    (path / "blobs/0.bin").write_bytes(raw)
    _write_json(path / "manifest", {
        "format": PREDICTOR_FORMAT,
        "feature_names": list(c.feature_names),
        "fallback_max": c.fallback_max,
        "floor": c.floor,
        "holdout_spearman": c.holdout_spearman,
        "forest_params": c.forest.get_params(),
        "arrays": layout,
        "blob": "blobs/0.bin",
        "sha256": hashlib.sha256(raw).hexdigest(),
    })
    return path


def load_cost_predictor(path) -> CostPredictor:
    path = Path(path)
    manifest = _read_manifest(path, PREDICTOR_FORMAT)
    if tuple(manifest["feature_names"]) != META_NAMES:
        raise BundleError(f"{path}: meta-feature layout differs from this build")
    data = _read_blob(path, manifest["blob"], manifest["sha256"])
    forest = ForestRegressor(**manifest["forest_params"]).set_state(_unpack(data, manifest["arrays"]))
    return CostPredictor(forest, manifest["fallback_max"], manifest["floor"], META_NAMES, manifest["holdout_spearman"])
