import json

import numpy as np
import pytest

from dyadsense.evalkit import assign_folds, metric_suite
from dyadsense.features import FeatureSchema, extract_matrix
from dyadsense.geodyads import eligible_dyads, prepare_grids
from dyadsense.ingest import StudyConfig, build_grid, parse_inputs
from dyadsense.learn import MissingAwareForestClassifier
from dyadsense.networks import build_label_tables, build_networks, reciprocity
from dyadsense.synth import SynthConfig, generate_networks, generate_traces, leakage_fixture, traces_to_grids, \
    write_cohort
from dyadsense.thresholds import ThresholdSet


def small(**kw):
    kw.setdefault("n_nodes", 8)
    kw.setdefault("period_days", 7)
    kw.setdefault("break_days", 2)
    return SynthConfig(**kw)


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(change_rate=1.5)
    assert SynthConfig().change_rate == 0.13


def test_zero_change_rate_keeps_waves():
    nets = generate_networks(SynthConfig(n_nodes=20, change_rate=0.0))
    for tt in ("friend", "close_friend"):
        a = nets[(1, tt)].adjacency
        assert np.array_equal(a, nets[(2, tt)].adjacency) and np.array_equal(a, nets[(3, tt)].adjacency)


def test_reciprocity_without_boost_matches_density():
    nets = generate_networks(SynthConfig(n_nodes=200, reciprocity_boost=0.0, seed=1))
    f = nets[(1, "friend")]
    assert reciprocity(f) == pytest.approx(f.density(), abs=0.02)
    boosted = generate_networks(SynthConfig(n_nodes=200, reciprocity_boost=0.8, seed=1))[(1, "friend")]
    assert reciprocity(boosted) > reciprocity(f) + 0.3


def test_close_subset_of_friend_and_change_rate():
    nets = generate_networks(SynthConfig(n_nodes=60, seed=2))
    for w in (1, 2, 3):
        assert np.all(nets[(w, "close_friend")].adjacency <= nets[(w, "friend")].adjacency)
    a1, a2 = nets[(1, "friend")].adjacency, nets[(2, "friend")].adjacency
    off = ~np.eye(60, dtype=bool)
    assert (a1 != a2)[off].mean() == pytest.approx(0.13, abs=0.02)


def test_no_missing_gives_full_grids():
    cfg = small(missing_rate=0.0)
    tr = generate_traces(generate_networks(cfg), cfg)
    assert not np.isnan(tr.lat).any()


def test_missing_rate_is_respected():
    cfg = small(missing_rate=0.3)
    tr = generate_traces(generate_networks(cfg), cfg)
    assert np.isnan(tr.lat).mean() == pytest.approx(0.3, abs=0.06)


def test_cohort_files_follow_contracts(tmp_path):
    cfg = small(seed=5)
    write_cohort(tmp_path, cfg)
    study = StudyConfig.from_json(tmp_path / "config.json")
    samples, wifi, ties, rep = parse_inputs(tmp_path / "locations.csv", tmp_path / "wifi.csv",
                                            tmp_path / "surveys.csv", study)
    assert rep.rejected == [] and samples and wifi and ties
    truth = json.loads((tmp_path / "ground_truth.json").read_text())
    nets = build_networks(ties, study.roster)
    for w in (1, 2, 3):
        got = sorted([e, a] for e in study.roster for a in study.roster
                     if e != a and nets[(w, "friend")].tie(e, a))
        assert got == sorted(truth["ties"][f"friend@{w}"])
    # grids built from the CSVs equal the generator's own grids
    grids = build_grid(samples, wifi, study, devices=study.roster)
    direct = traces_to_grids(generate_traces(generate_networks(cfg), cfg), study)
    for d in study.roster:
        np.testing.assert_array_equal(grids[d].lat, direct[d].lat)
        assert grids[d].hotspots == direct[d].hotspots


def test_generator_is_reproducible(tmp_path):
    cfg = small(seed=9)
    write_cohort(tmp_path / "a", cfg)
    write_cohort(tmp_path / "b", cfg)
    for name in ("locations.csv", "wifi.csv", "surveys.csv", "config.json", "ground_truth.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_leakage_fixture_shape():
    ds = leakage_fixture(n_nodes=10, seed=0)
    assert len(ds.y) == 2 * ds.n_dyads * 2
    # both directions of a dyad share one vector and one label
    np.testing.assert_array_equal(ds.X[0::2], ds.X[1::2])
    np.testing.assert_array_equal(ds.y[0::2], ds.y[1::2])
    import pandas as pd
    from dyadsense.networks import LabelTable

    a, b = zip(*(g.split("|") for g in ds.groups))
    t = LabelTable("friend", pd.DataFrame({"dyad_a": a, "dyad_b": b, "period": ds.periods}))
    plan = assign_folds(t, "dyadic", 5, 0)
    assert (pd.Series(plan.assignment).groupby(ds.groups).nunique() == 1).all()


def _mcc_for_lift(lift, seed):
    cfg = SynthConfig(n_nodes=10, co_location_lift=lift, period_days=7, break_days=0, seed=seed)
    nets = generate_networks(cfg)
    study = cfg.study_config()
    grids = traces_to_grids(generate_traces(nets, cfg), study)
    dyads, _ = eligible_dyads(grids, cfg.nodes)
    schema = FeatureSchema(timeframes=("all",))
    fm = extract_matrix(prepare_grids(grids, study), dyads, ThresholdSet.static().breaks, study, schema)
    t = build_label_tables(nets, fm, "friend")
    X, y, _, _ = t.design(fm)
    scores = np.zeros(len(y))
    for train, test in assign_folds(t, "dyadic", 5, seed).splits():
        m = MissingAwareForestClassifier(n_estimators=25, random_state=seed).fit(X[train], y[train])
        scores[test] = m.predict_proba(X[test])[:, 1]
    return metric_suite(scores, y)["mcc"]


def test_lift_monotonicity_over_seeds():
    low = np.mean([_mcc_for_lift(0.0, s) for s in range(10)])
    high = np.mean([_mcc_for_lift(0.8, s) for s in range(10)])
    assert high >= low
