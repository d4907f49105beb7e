import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from odaccel.combination import combine, combine_average, combine_max, combine_moa, moa_buckets
from odaccel.core import RngStream, zscore_columns

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
matrices = arrays(np.float64, st.tuples(st.integers(2, 25), st.integers(1, 9)), elements=finite)


def test_identical_columns():
    col = np.array([1.0, 4.0, 2.0, 8.0])
    s = np.column_stack([col, col, col])
    z = zscore_columns(col[:, None])[:, 0]
    np.testing.assert_allclose(combine_average(s), z, atol=1e-15)
    np.testing.assert_allclose(combine_max(s), z, atol=1e-15)
    assert combine_average(col[:, None]).tolist() == z.tolist()


def test_increasing_transform_keeps_ranking():
    x = np.random.default_rng(0).normal(size=30)
    s = np.column_stack([x, np.exp(x)])
    assert np.argsort(combine_average(s)).tolist() == np.argsort(x).tolist()


def test_dominating_column_wins_the_max():
    a = np.array([0.0, 1.0, 2.0, 3.0])
    b = np.array([0.0, 0.0, 0.0, 0.0])
    assert combine_max(np.column_stack([b, a])).tolist() == np.maximum(zscore_columns(a[:, None])[:, 0], 0.0).tolist()


def test_max_matches_loop_oracle():
    s = np.random.default_rng(1).normal(size=(4, 3))
    z = zscore_columns(s)
    expect = [max(z[r, c] for c in range(3)) for r in range(4)]
    assert combine_max(s).tolist() == expect


def test_moa_two_buckets_matches_enumeration():
    s = np.random.default_rng(2).normal(size=(6, 4))
    z = zscore_columns(s)
    got = combine_moa(s, 2, RngStream(5))
    pairings = [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))]
    candidates = [np.maximum(z[:, list(p)].mean(1), z[:, list(q)].mean(1)) for p, q in pairings]
    buckets = [tuple(b.tolist()) for b in moa_buckets(4, 2, RngStream(5))]
    chosen = [i for i, pq in enumerate(pairings) if set(pq) == set(buckets)]
    assert len(chosen) == 1
    np.testing.assert_array_equal(got, candidates[chosen[0]])


@given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 1000))
def test_buckets_partition_columns(m, size, seed):
    size = min(size, m)
    b = moa_buckets(m, size, RngStream(seed))
    assert len(b) == -(-m // size)
    assert sorted(np.concatenate(b).tolist()) == list(range(m))
    assert all(len(x) == size for x in b[:-1]) and 1 <= len(b[-1]) <= size


@given(matrices, st.integers(0, 100))
def test_moa_identities(s, seed):
    m = s.shape[1]
    assert combine_moa(s, m, RngStream(seed)).tobytes() == combine_average(s).tobytes()
    assert combine_moa(s, 1, RngStream(seed)).tobytes() == combine_max(s).tobytes()


@given(matrices, st.integers(1, 9))
def test_moa_between_average_and_max(s, size):
    size = min(size, s.shape[1])
    moa = combine_moa(s, size, RngStream(3))
    assert np.all(moa <= combine_max(s) + 1e-12)
    # max of bucket means is at least the overall (weighted) mean when buckets are equal
    if s.shape[1] % size == 0:
        assert np.all(moa >= combine_average(s) - 1e-12)


def test_raw_mode_and_validation():
    s = np.array([[1.0, 10.0], [2.0, 30.0]])
    assert combine(s, "average", standardize=False).tolist() == [5.5, 16.0]
    assert combine(s, "max", standardize=False).tolist() == [10.0, 30.0]
    # bucket size larger than m is clipped by the dispatcher
    assert combine(s, "moa", bucket_size=5).tolist() == combine_average(s).tolist()
    with pytest.raises(ValueError, match="unknown combination"):
        combine(s, "median")
    with pytest.raises(ValueError):
        combine_moa(s, 3)
    with pytest.raises(ValueError):
        combine_average(np.ones((1, 3)))
    with pytest.raises(ValueError):
        combine_average([[np.nan, 1.0], [0.0, 1.0]])
