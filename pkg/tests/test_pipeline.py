import logging

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from odaccel.approximation import RandomForestConfig, pseudo_labels
from odaccel.core import RngStream, make_synthetic, roc_auc, train_test_split
from odaccel.detectors import HBOS, KNN, LOF, IForest
from odaccel.detectors.pool import ModelSpec
from odaccel.pipeline import SUOD, suod_fit, suod_predict
from odaccel.scheduling import TaskError, TimingRecord, train_cost_predictor

OFF = dict(rp_flag_global=False, approx_flag_global=False, bps_flag=False)

SPECS = [
    ModelSpec("knn", {"n_neighbors": 5}),
    ModelSpec("avg_knn", {"n_neighbors": 8}),
    ModelSpec("lof", {"n_neighbors": 10}),
    ModelSpec("hbos", {"n_histograms": 10}),
    ModelSpec("iforest", {"n_estimators": 20}, seed=4),
    ModelSpec("abod", {"n_neighbors": 6}),
    ModelSpec("feature_bagging", {"n_estimators": 3}, seed=2),
]


@pytest.fixture(scope="module")
def data():
    ds = make_synthetic(160, 40, 6, RngStream(0))
    tr, te = train_test_split(ds, 0.6, RngStream(1))
    return tr.features, te.features, te.labels


def _predictor():
    recs = [TimingRecord(ModelSpec(k), n, d, c * n * d)
            for k, c in (("knn", 1e-7), ("lof", 2e-7), ("hbos", 1e-8), ("iforest", 5e-8),
                         ("avg_knn", 1e-7), ("abod", 3e-7), ("feature_bagging", 4e-7))
            for n in (50, 100, 200) for d in (2, 4, 8)]
    return train_cost_predictor(recs)


def test_all_off_equals_naive_loop(data):
    X, Xt, _ = data
    clf = suod_fit(SPECS, X, **OFF)
    naive = np.column_stack([s.build().fit(X).decision_function(Xt) for s in SPECS])
    assert suod_predict(clf, Xt).tobytes() == naive.tobytes()
    train = np.column_stack([s.build().fit(X).decision_scores_ for s in SPECS])
    assert clf.train_scores_.tobytes() == train.tobytes()


def test_single_model_all_off_is_plain_fit(data):
    X, Xt, _ = data
    clf = SUOD([KNN(3)], **OFF).fit(X)
    assert clf.score_matrix(Xt)[:, 0].tolist() == KNN(3).fit(X).decision_function(Xt).tolist()


def test_accepts_instances_specs_and_dicts(data):
    X, Xt, _ = data
    a = SUOD([LOF(7), ModelSpec("hbos"), {"kind": "knn", "hyperparams": {"n_neighbors": 4}}], **OFF).fit(X)
    assert a.score_matrix(Xt).shape == (len(Xt), 3)
    with pytest.raises(TypeError):
        SUOD(["knn"]).fit(X)


@pytest.mark.parametrize("combination", ["average", "max", "moa"])
def test_worker_count_does_not_change_results(data, combination):
    X, Xt, _ = data
    cost = _predictor()
    outs = []
    for t in (1, 4):
        clf = suod_fit(SPECS, X, cost, n_jobs=t, combination=combination, bucket_size=3,
                       approx_config=RandomForestConfig(n_trees=10))
        outs.append((suod_predict(clf, Xt).tobytes(), clf.decision_function(Xt).tobytes(),
                     clf.decision_scores_.tobytes()))
    assert outs[0] == outs[1]


def test_balanced_schedule_used_only_with_predictor(data, caplog):
    X, _, _ = data
    with caplog.at_level(logging.WARNING):
        plain = suod_fit(SPECS, X, n_jobs=3).summary()
    assert plain["schedule"] == "generic" and "without a cost predictor" in caplog.text
    bal = suod_fit(SPECS, X, _predictor(), n_jobs=3).summary()
    assert bal["schedule"] == "balanced" and bal["workers"] == 3
    assert suod_fit(SPECS, X, _predictor(), n_jobs=1).summary()["schedule"] == "generic"


def test_projection_and_approximation_policy(data):
    X, _, _ = data
    clf = suod_fit(SPECS, X, approx_config=RandomForestConfig(n_trees=10))
    by_kind = {m.spec.kind: m for m in clf.members_}
    for kind in ("knn", "avg_knn", "lof", "abod", "feature_bagging"):
        assert by_kind[kind].approximator is not None
        assert by_kind[kind].projection.method == "toeplitz" and by_kind[kind].projection.k == 4
    for kind in ("hbos", "iforest"):
        assert by_kind[kind].approximator is None
        assert by_kind[kind].projection.method == "none"
    s = clf.summary()
    assert (s["models"], s["projected"], s["approximated"]) == (7, 5, 5)


def test_per_model_overrides(data):
    X, _, _ = data
    clf = SUOD([KNN(5), HBOS()], rp_flags=[False, True], approx_flags=[False, True],
               approx_config=RandomForestConfig(n_trees=5)).fit(X)
    assert clf.members_[0].projection.method == "none" and clf.members_[0].approximator is None
    assert clf.members_[1].projection.method == "toeplitz" and clf.members_[1].approximator is not None
    clf = SUOD([KNN(5)], costly_kinds=["lof"]).fit(X)
    assert clf.n_approximated_ == 0


def test_strip_routes_to_original_detectors(data):
    X, Xt, _ = data
    clf = suod_fit(SPECS, X, approx_config=RandomForestConfig(n_trees=10))
    full = suod_predict(clf, Xt)
    plain = suod_predict(clf.strip_approximators(), Xt)
    for j, m in enumerate(clf.members_):
        same = full[:, j].tobytes() == plain[:, j].tobytes()
        assert same == (m.approximator is None), m.spec.kind
    assert clf.n_approximated_ == 5


def test_approximator_on_training_data_tracks_pseudo_labels(data):
    X, _, _ = data
    clf = suod_fit([ModelSpec("knn", {"n_neighbors": 5})], X, rp_flag_global=False)
    mem = clf.members_[0]
    truth = pseudo_labels(mem.model, X)
    col = clf.score_matrix(X)[:, 0]
    # pseudo labels thresholded at their top decile serve as pseudo truth
    top = (truth >= np.quantile(truth, 0.9)).astype(int)
    assert roc_auc(col, top) >= 0.95
    assert np.corrcoef(col, truth)[0, 1] > 0.95


def test_random_state_controls_projections(data):
    X, Xt, _ = data
    a = suod_fit(SPECS[:3], X, random_state=1, approx_flag_global=False)
    b = suod_fit(SPECS[:3], X, random_state=1, approx_flag_global=False)
    c = suod_fit(SPECS[:3], X, random_state=2, approx_flag_global=False)
    assert suod_predict(a, Xt).tobytes() == suod_predict(b, Xt).tobytes()
    assert suod_predict(a, Xt).tobytes() != suod_predict(c, Xt).tobytes()


def test_all_on_keeps_accuracy(data):
    X, Xt, y = data
    base = roc_auc(suod_fit(SPECS, X, **OFF).decision_function(Xt), y)
    on = roc_auc(suod_fit(SPECS, X).decision_function(Xt), y)
    assert on >= base - 0.05


def test_errors(data):
    X, Xt, _ = data
    with pytest.raises(ValueError, match="at least one"):
        SUOD([]).fit(X)
    with pytest.raises(ValueError):
        SUOD([KNN()], n_jobs=0).fit(X)
    with pytest.raises(ValueError):
        SUOD([KNN()], rp_method="pca").fit(X)
    with pytest.raises(ValueError):
        SUOD([KNN()], combination="median").fit(X)
    with pytest.raises(ValueError):
        SUOD([KNN(), LOF()], rp_flags=[True]).fit(X)
    clf = SUOD([KNN()], **OFF).fit(X)
    with pytest.raises(ValueError, match="fit on 6 features"):
        clf.score_matrix(Xt[:, :5])
    # a model that cannot be fit reports its index
    with pytest.raises(TaskError) as info:
        SUOD([KNN(3), KNN(500)], **OFF).fit(X)
    assert info.value.index == 1


def test_estimator_api(data):
    X, _, _ = data
    clf = SUOD([KNN(), IForest(n_estimators=10)], n_jobs=2)
    assert clone(clf).get_params()["n_jobs"] == 2
    with pytest.raises(NotFittedError):
        clf.score_matrix(X)
    assert "n_jobs" not in clf.fit(X).config_snapshot()
