import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from odaccel.core import RngStream, make_synthetic
from odaccel.detectors import (
    ABOD,
    HBOS,
    KNN,
    LOF,
    AvgKNN,
    FeatureBagging,
    IForest,
    ModelSpec,
    fit_model,
    generate_model_pool,
    score_model,
    score_pool,
    spec_of,
)
from odaccel.detectors.iforest import average_path_length
from odaccel.detectors.neighbors import kneighbors
import oracles


def _data(seed, n, d, grid=False):
    gen = np.random.default_rng(seed)
    if grid:
        return gen.integers(0, 4, size=(n, d)).astype(float)
    return gen.normal(size=(n, d))


cases = st.tuples(st.integers(0, 10 ** 6), st.integers(8, 60), st.integers(1, 5), st.booleans())


# -- neighbor search ---------------------------------------------------------

@given(cases, st.sampled_from(["euclidean", "manhattan", "minkowski"]))
def test_kneighbors_matches_stable_sort(case, metric):
    seed, n, d, grid = case
    X = _data(seed, n, d, grid)
    Q = _data(seed + 1, 7, d, grid)
    k = min(5, n - 1)
    dist, idx = kneighbors(Q, X, k, metric, 3.0)
    o_dist, o_idx = oracles.neighbors(Q, X, k, metric, 3.0)
    assert np.array_equal(idx, o_idx)
    np.testing.assert_allclose(dist, o_dist, rtol=1e-12, atol=1e-12)
    dist, idx = kneighbors(X, X, k, metric, 3.0, exclude_self=True)
    o_dist, o_idx = oracles.neighbors(X, X, k, metric, 3.0, exclude_self=True)
    assert np.array_equal(idx, o_idx)


def test_kneighbors_counts_distance_work():
    counter = {}
    kneighbors(np.zeros((4, 3)), np.ones((10, 3)), 2, counter=counter)
    assert counter["distance_ops"] == 4 * 10 * 3


# -- oracle agreement --------------------------------------------------------------

@given(cases, st.sampled_from(["largest", "mean", "median"]))
def test_knn_matches_oracle(case, method):
    seed, n, d, grid = case
    X, Q = _data(seed, n, d, grid), _data(seed + 1, 9, d, grid)
    k = min(4, n - 1)
    m = KNN(k, method).fit(X)
    np.testing.assert_allclose(m.decision_scores_, oracles.knn_scores(X, X, k, method, True), atol=1e-9)
    np.testing.assert_allclose(m.decision_function(Q), oracles.knn_scores(X, Q, k, method), atol=1e-9)


@given(cases)
def test_avg_knn_is_knn_mean(case):
    seed, n, d, grid = case
    X = _data(seed, n, d, grid)
    a = AvgKNN(3).fit(X)
    assert a.method == "mean"
    np.testing.assert_array_equal(a.decision_scores_, KNN(3, "mean").fit(X).decision_scores_)


@given(cases, st.sampled_from([("euclidean", 2), ("manhattan", 1), ("minkowski", 3)]))
def test_lof_matches_oracle(case, metric):
    seed, n, d, grid = case
    X, Q = _data(seed, n, d, grid), _data(seed + 1, 9, d, grid)
    k = min(5, n - 1)
    m = LOF(k, metric[0], metric[1]).fit(X)
    np.testing.assert_allclose(m.decision_scores_, oracles.lof_scores(X, X, k, *metric, self_scores=True),
                               rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(m.decision_function(Q), oracles.lof_scores(X, Q, k, *metric), rtol=1e-9, atol=1e-9)


@given(cases)
def test_abod_matches_oracle(case):
    seed, n, d, grid = case
    X, Q = _data(seed, n, d, grid), _data(seed + 1, 6, d, grid)
    k = min(5, n - 1)
    m = ABOD(k).fit(X)
    np.testing.assert_allclose(m.decision_scores_, oracles.abod_scores(X, X, k, True), rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(m.decision_function(Q), oracles.abod_scores(X, Q, k), rtol=1e-9, atol=1e-9)


@given(cases, st.integers(2, 12), st.sampled_from([0.05, 0.1, 0.5]))
def test_hbos_matches_oracle(case, bins, tol):
    seed, n, d, grid = case
    X, Q = _data(seed, n, d, grid), _data(seed + 1, 9, d, grid) * 2
    m = HBOS(bins, tol).fit(X)
    np.testing.assert_allclose(m.decision_scores_, oracles.hbos_scores(X, X, bins, tol), rtol=1e-12)
    np.testing.assert_allclose(m.decision_function(Q), oracles.hbos_scores(X, Q, bins, tol), rtol=1e-12)


# -- worked examples -----------------------------------------------------------------

def test_knn_one_dimensional_example():
    X = np.array([[0.0], [1.0], [2.0], [10.0]])
    m = KNN(1).fit(X)
    assert m.decision_scores_.tolist() == [1.0, 1.0, 1.0, 8.0]
    # unseen points use every training point, so a training row finds itself
    assert m.decision_function(X).tolist() == [0.0, 0.0, 0.0, 0.0]


def test_knn_three_points_nearest_distance():
    X = np.array([[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]])
    assert KNN(1).fit(X).decision_scores_.tolist() == [1.0, pytest.approx(np.sqrt(18)), 1.0]


def test_lof_square_corners_symmetric():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    s = LOF(3).fit(X).decision_scores_
    np.testing.assert_allclose(s, s[0])
    assert s[0] == pytest.approx(1.0)


def test_lof_uniform_grid_interior():
    g = np.arange(12, dtype=float)
    X = np.array([(a, b) for a in g for b in g])
    s = LOF(8).fit(X).decision_scores_
    interior = (X[:, 0] >= 2) & (X[:, 0] <= 9) & (X[:, 1] >= 2) & (X[:, 1] <= 9)
    assert np.all((s[interior] >= 0.8) & (s[interior] <= 1.2))


def test_hbos_edge_bin_and_constant_data():
    X = np.array([[0.0], [2.0], [4.0], [10.0]])
    m = HBOS(2, 0.1).fit(X)
    # 11 is past the top edge: same bin (and score) as 10
    assert m.decision_function([[11.0]])[0] == m.decision_function([[10.0]])[0]
    const = HBOS().fit(np.full((5, 2), 3.0)).decision_scores_
    assert np.all(const == const[0])


def test_iforest_properties():
    ds = make_synthetic(160, 40, 2, RngStream(0))
    m = IForest(n_estimators=100, random_state=1).fit(ds.features)
    s = m.decision_scores_
    assert np.all((s > 0) & (s < 1))
    far = m.decision_function([[30.0, -30.0]])[0]
    assert far > np.median(s)
    again = IForest(n_estimators=100, random_state=1).fit(ds.features)
    assert np.array_equal(again.decision_function(ds.features), m.decision_function(ds.features))
    other = IForest(n_estimators=100, random_state=2).fit(ds.features)
    assert not np.array_equal(other.decision_scores_, s)


def test_iforest_subsample_and_depth():
    X = np.random.default_rng(0).normal(size=(600, 3))
    m = IForest(n_estimators=5, max_samples=256, random_state=0).fit(X)
    assert m.psi_ == 256
    assert IForest(n_estimators=5, random_state=0).fit(X[:50]).psi_ == 50


def test_average_path_length_values():
    assert average_path_length(1) == 0.0
    assert average_path_length(2) == 1.0
    assert average_path_length(256) == pytest.approx(2 * (np.log(255) + np.euler_gamma) - 2 * 255 / 256)


def test_feature_bagging_subspaces_and_average():
    X = np.random.default_rng(3).normal(size=(60, 6))
    m = FeatureBagging(n_estimators=8, n_neighbors=5, random_state=4).fit(X)
    for sub in m.subspaces_:
        assert 3 <= len(sub) <= 5
        assert len(set(sub.tolist())) == len(sub)
    manual = np.mean([LOF(5).fit(X[:, s]).decision_scores_ for s in m.subspaces_], axis=0)
    np.testing.assert_allclose(m.decision_scores_, manual)
    Q = X[:7] + 0.1
    manual_q = np.mean([e.decision_function(Q[:, s]) for e, s in zip(m.estimators_, m.subspaces_)], axis=0)
    np.testing.assert_allclose(m.decision_function(Q), manual_q)


# -- invariances ---------------------------------------------------------------------

@pytest.mark.parametrize("make", [lambda: KNN(4), lambda: AvgKNN(4), lambda: LOF(6), lambda: ABOD(5)])
def test_translation_invariance(make):
    X = np.random.default_rng(1).normal(size=(80, 3))
    shift = np.array([5.0, -3.0, 2.5])
    a = make().fit(X).decision_scores_
    b = make().fit(X + shift).decision_scores_
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("method", ["largest", "mean", "median"])
def test_knn_scale_equivariance(method):
    X = np.random.default_rng(2).normal(size=(50, 4))
    a = KNN(5, method).fit(X).decision_scores_
    np.testing.assert_allclose(KNN(5, method).fit(3.5 * X).decision_scores_, 3.5 * a, rtol=1e-12)


# -- validation ----------------------------------------------------------------------

@pytest.mark.parametrize("est, n", [(KNN(5), 5), (LOF(3), 3), (ABOD(4), 4), (ABOD(1), 10), (HBOS(1), 5),
                                    (IForest(0), 5), (IForest(max_features=0.0), 5), (KNN(method="max"), 9)])
def test_invalid_hyperparameters(est, n):
    with pytest.raises(ValueError):
        est.fit(np.random.default_rng(0).normal(size=(n, 2)))


def test_dimension_mismatch_on_score():
    m = KNN(2).fit(np.zeros((5, 3)) + np.arange(5)[:, None])
    with pytest.raises(ValueError, match="fit on 3 features"):
        m.decision_function(np.zeros((2, 4)))


def test_estimator_api():
    for est in (KNN(), AvgKNN(), LOF(), HBOS(), IForest(), ABOD(), FeatureBagging()):
        assert clone(est).get_params() == est.get_params()


# -- pool ----------------------------------------------------------------------------

def test_generate_model_pool_sizes():
    specs = generate_model_pool({"knn": {"n_neighbors": [1, 5], "method": ["largest", "mean", "median"]}},
                                RngStream(0))
    assert len(specs) == 6
    assert len({tuple(sorted(s.hyperparams.items())) for s in specs}) == 6
    assert len({s.seed for s in specs}) == 6
    assert len(generate_model_pool({"hbos": {"n_histograms": [5, 10], "tolerance": [0.1]}}, RngStream(0))) == 2
    again = generate_model_pool({"knn": {"n_neighbors": [1, 5], "method": ["largest", "mean", "median"]}},
                                RngStream(0))
    assert again == specs


def test_generate_model_pool_errors():
    with pytest.raises(ValueError):
        generate_model_pool({"knn": {"n_neighbors": []}}, RngStream(0))
    with pytest.raises(ValueError):
        generate_model_pool({"ocsvm": {"nu": [0.1]}}, RngStream(0))
    with pytest.raises(ValueError):
        generate_model_pool({}, RngStream(0))


def test_model_spec_round_trip_and_unknown():
    spec = ModelSpec("iforest", {"n_estimators": 10}, seed=42)
    assert ModelSpec.from_dict(spec.to_dict()) == spec
    model = spec.build()
    assert model.random_state == 42
    described = spec_of(model)
    assert described.seed == 42
    assert described.build().get_params() == model.get_params()
    with pytest.raises(ValueError):
        ModelSpec("unknown").build()
    with pytest.raises(ValueError):
        ModelSpec("knn", {"bogus": 1}).build()


def test_score_pool_columns_and_errors():
    X = np.random.default_rng(0).normal(size=(30, 3))
    spec = ModelSpec("knn", {"n_neighbors": 3})
    one = fit_model(spec, X)
    mat = score_pool([one], X)
    assert mat.shape == (30, 1)
    np.testing.assert_array_equal(mat[:, 0], score_model(one, X))
    twin = score_pool([fit_model(spec, X), fit_model(spec, X)], X)
    assert np.array_equal(twin[:, 0], twin[:, 1])
    narrow = fit_model(spec, X[:, :2])
    with pytest.raises(RuntimeError, match="model 1"):
        score_pool([one, narrow], X)
