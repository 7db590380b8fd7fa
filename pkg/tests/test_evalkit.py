import json
import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import auc_pairs, binom_tail_mp, confusion
from dyadsense.evalkit import (
    ConfusionCounts,
    DyadicKFold,
    EvalReport,
    TemporalBlockSplit,
    UnrestrictedKFold,
    assign_folds,
    auc_score,
    binomial_vs_nir,
    clopper_pearson,
    make_splitter,
    mcc,
    metric_suite,
)
from dyadsense.networks import LabelTable


def table(n_dyads=50, waves=(2, 3)):
    rows = []
    for d in range(n_dyads):
        a, b = f"n{d:03d}", f"m{d:03d}"
        for w in waves:
            for ego, alter in ((a, b), (b, a)):
                rows.append((ego, alter, w, f"P{w - 1}", min(a, b), max(a, b), d % 2, len(rows)))
    return LabelTable("friend", pd.DataFrame(rows, columns=["ego", "alter", "wave", "period", "dyad_a", "dyad_b",
                                                            "label", "row"]))


def test_mcc_conventions():
    assert mcc(ConfusionCounts(0, 80, 0, 20)) == 0.0
    assert mcc(ConfusionCounts(0, 0, 0, 0)) == 0.0
    assert mcc(ConfusionCounts(30, 70, 0, 0)) == 1.0
    assert mcc(ConfusionCounts(90, 80, 20, 10)) == pytest.approx(0.7035, abs=1e-4)
    assert mcc(ConfusionCounts(90, 80, 20, 10)) == pytest.approx(7000 / math.sqrt(110 * 100 * 100 * 90), rel=1e-12)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_mcc_label_swap_and_range(tp, tn, fp, fn):
    m = mcc(ConfusionCounts(tp, tn, fp, fn))
    assert -1 - 1e-12 <= m <= 1 + 1e-12
    assert m == pytest.approx(mcc(ConfusionCounts(tn, tp, fn, fp)), abs=1e-12)


def test_auc_ties_and_monotone():
    assert auc_score([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5
    rng = np.random.default_rng(0)
    s = rng.random(40)
    y = rng.random(40) < 0.4
    assert auc_score(s, y) == pytest.approx(auc_score(np.exp(3 * s) - 2, y), abs=1e-12)
    assert math.isnan(auc_score(s, np.ones(40)))


def test_binomial_examples():
    assert binomial_vs_nir(10, 10, 0.5) == pytest.approx(2**-10, rel=1e-12)
    assert binomial_vs_nir(0, 10, 0.5) == 1.0
    assert binomial_vs_nir(70, 100, 0.7) > 0.5
    with pytest.raises(ValueError):
        binomial_vs_nir(3, 2, 0.5)


def test_clopper_pearson_definition():
    x, n = 37, 50
    lo, hi = clopper_pearson(x, n)
    assert binom_tail_mp(x, n, lo) == pytest.approx(0.025, rel=1e-6)
    assert 1 - binom_tail_mp(x + 1, n, hi) == pytest.approx(0.025, rel=1e-6)
    assert clopper_pearson(0, 10)[0] == 0 and clopper_pearson(10, 10)[1] == 1


def test_suite_on_ten_rows():
    s = np.array([0.9, 0.8, 0.7, 0.6, 0.55, 0.4, 0.3, 0.2, 0.1, 0.5])
    y = np.array([1, 1, 0, 1, 0, 1, 0, 0, 0, 1])
    r = metric_suite(s, y)
    tp, tn, fp, fn = confusion(s >= 0.5, y)
    assert (r["tp"], r["tn"], r["fp"], r["fn"]) == (tp, tn, fp, fn)
    assert r["precision"] == pytest.approx(tp / (tp + fp))
    assert r["recall"] == pytest.approx(tp / (tp + fn))
    assert r["specificity"] == pytest.approx(tn / (tn + fp))
    assert r["f1"] == pytest.approx(2 * r["precision"] * r["recall"] / (r["precision"] + r["recall"]))
    assert r["auc"] == pytest.approx(auc_pairs(s, y))
    assert r["nir"] == 0.5


def test_perfect_and_no_positive():
    y = np.array([0, 1, 1, 0])
    r = metric_suite(y.astype(float), y)
    assert r["accuracy"] == 1 and r["f1"] == 1 and r["mcc"] == 1
    r = metric_suite(np.zeros(4), y)
    assert "no positive predictions" in r["notes"]
    assert math.isnan(r["precision"]) and r["mcc"] == 0


def test_report_json_is_stable():
    r = EvalReport("friend", "forest", {"dyadic": metric_suite(np.zeros(4), np.array([0, 1, 1, 0]))})
    d = json.loads(r.to_json())
    assert d["cv"]["dyadic"]["precision"] is None
    assert r.to_json() == r.to_json()
    assert r.to_csv_rows()[0] == ["target", "cv", "metric", "value"]


def test_dyadic_never_splits_a_dyad():
    t = table(200, waves=(1, 2, 3))
    plan = assign_folds(t, "dyadic", 10, seed=3)
    key = t.rows["dyad_a"] + "|" + t.rows["dyad_b"]
    per = pd.Series(plan.assignment).groupby(key.to_numpy()).nunique()
    assert (per == 1).all()
    assert (pd.Series(plan.assignment).groupby(key.to_numpy()).size() == 6).all()


def test_temporal_block():
    t = table(20)
    plan = assign_folds(t, "temporal", 10, seed=0)
    (train, test), = list(plan.splits())
    assert set(t.rows["period"].iloc[train]) == {"P1"} and set(t.rows["period"].iloc[test]) == {"P2"}
    assert len(train) == (t.rows["period"] == "P1").sum()
    with pytest.raises(ValueError):
        assign_folds(table(5, waves=(2,)), "temporal_block", 10, 0)


def test_unrestricted_sizes_and_determinism():
    t = table(250)
    a = assign_folds(t, "unrestricted", 5, seed=11).assignment
    assert np.array_equal(a, assign_folds(t, "unrestricted", 5, seed=11).assignment)
    counts = np.bincount(a, minlength=5)
    assert counts.sum() == 1000
    assert np.all(np.abs(counts - 200) < 4 * math.sqrt(1000 * 0.2 * 0.8))


def test_sklearn_splitter_protocol():
    from sklearn.model_selection import cross_val_predict
    from sklearn.linear_model import LogisticRegression

    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 2))
    y = (X[:, 0] > 0).astype(int)
    groups = np.repeat(np.arange(20), 3)
    p = cross_val_predict(LogisticRegression(), X, y, cv=DyadicKFold(5, 0), groups=groups)
    assert p.shape == (60,)
    assert make_splitter("temporal").get_n_splits() == 1
    with pytest.raises(ValueError):
        make_splitter("nope")
    with pytest.raises(ValueError):
        UnrestrictedKFold(1)
    with pytest.raises(ValueError):
        list(TemporalBlockSplit().split(X, y, np.array(["P1"] * 60)))
