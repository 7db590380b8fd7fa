import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exhaustive_partition_cost
from dyadsense.ingest import PAPER_BREAKS
from dyadsense.thresholds import (
    DistanceThresholder,
    ThresholdSet,
    cluster_1d,
    eccdf,
    optimal_partition,
    survival_at,
)


def test_eccdf_single_sample():
    x, s = eccdf([5.0])
    assert survival_at(x, s, 4.9) == 1.0
    assert survival_at(x, s, 5.0) == 0.0
    assert survival_at(x, s, 6.0) == 0.0


def test_eccdf_uniform():
    x, s = eccdf([1, 2, 3, 4])
    assert survival_at(x, s, 2.5) == 0.5


def test_eccdf_weighted():
    x, s = eccdf([1, 2], [3, 1])
    assert survival_at(x, s, 1.5) == pytest.approx(0.25)


def test_eccdf_empty():
    with pytest.raises(ValueError):
        eccdf([])


@given(st.lists(st.floats(0, 1e4), min_size=1, max_size=50),
       st.lists(st.floats(0.01, 10), min_size=50, max_size=50))
@settings(max_examples=100, deadline=None)
def test_eccdf_non_increasing(v, w):
    x, s = eccdf(v, w[: len(v)])
    assert np.all(np.diff(s) <= 1e-12)
    assert s[0] <= 1 and s[-1] == 0


def test_k1_is_cutoff():
    ts = cluster_1d([1, 5, 9], k=1, cutoff=2000)
    assert ts.breaks == (2000.0,)


def test_two_clusters_break_at_midpoint():
    ts = cluster_1d([1, 2, 10, 11], k=2, cutoff=2000)
    assert ts.breaks == (6.0, 2000.0)


def test_values_above_cutoff_ignored():
    ts = cluster_1d([1, 2, 10, 11, 5000, 9000], k=2, cutoff=2000)
    assert ts.breaks == (6.0, 2000.0)


def test_too_few_distinct_values():
    with pytest.raises(ValueError):
        cluster_1d([1, 1, 1, 2], k=3)


@pytest.mark.parametrize("seed", range(20))
def test_dp_matches_exhaustive(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 15))
    k = int(rng.integers(1, min(4, n) + 1))
    x = np.unique(rng.uniform(0, 100, n))
    w = rng.uniform(0.1, 5, len(x))
    cost, starts = optimal_partition(x, w, k)
    assert cost == pytest.approx(exhaustive_partition_cost(list(x), list(w), k), rel=1e-9, abs=1e-9)
    assert starts[0] == 0 and len(starts) == k


def test_weight_scaling_and_permutation_invariance():
    rng = np.random.default_rng(7)
    v = rng.uniform(0, 1999, 60).round()
    w = rng.uniform(0.5, 3, 60)
    a = cluster_1d(v, w, k=5)
    assert cluster_1d(v, w * 17.0, k=5) == a
    p = rng.permutation(60)
    assert cluster_1d(v[p], w[p], k=5) == a
    assert all(x < y for x, y in zip(a.breaks, a.breaks[1:]))


def test_threshold_set_validation_and_json():
    ts = ThresholdSet.static()
    assert ts.breaks == PAPER_BREAKS and ts.cutoff == 2000
    assert ThresholdSet.from_json(ts.to_json()) == ts
    with pytest.raises(ValueError):
        ThresholdSet(2000.0, (5.0, 3.0, 2000.0))
    with pytest.raises(ValueError):
        ThresholdSet(2000.0, (5.0, 1000.0))


def test_distance_thresholder():
    rng = np.random.default_rng(0)
    d = np.r_[rng.uniform(0, 3000, 400), np.nan]
    est = DistanceThresholder(n_thresholds=4).fit(d)
    assert est.breaks_[-1] == 2000 and len(est.breaks_) == 4
    out = est.transform([10.0, np.nan, 5000.0])
    assert out[0].tolist() == [1, 1, 1, 1]
    assert np.isnan(out[1]).all()
    assert out[2].tolist() == [0, 0, 0, 0]
    assert list(est.get_feature_names_out())[0] == "within_t1"
    static = DistanceThresholder(mode="static").fit(d)
    assert tuple(static.breaks_) == PAPER_BREAKS
