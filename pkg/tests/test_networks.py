import numpy as np
import pandas as pd
import pytest

from conftest import DAY_MS, T0, make_config
from dyadsense.features import FeatureMatrix
from dyadsense.geodyads import Dyad, DyadSeries
from dyadsense.ingest import SurveyTie
from dyadsense.networks import (
    TieNetwork,
    build_label_tables,
    build_networks,
    network_similarity,
    reciprocity,
    similarity_grid,
    tie_class,
    tie_type_distance_profile,
)


def net(adj, nodes=None, respondents=None, wave=1, tt="friend"):
    adj = np.asarray(adj)
    nodes = nodes or [f"v{i}" for i in range(len(adj))]
    return TieNetwork(wave, tt, nodes, adj, frozenset(nodes if respondents is None else respondents))


A3 = [[0, 1, 0], [1, 0, 0], [0, 1, 0]]


def test_pairs_mode_identity():
    a = net(A3)
    assert network_similarity(a, a, "pairs") == pytest.approx(0.5)
    assert network_similarity(a, a, "pairs") == pytest.approx(a.density())
    assert network_similarity(a, a, "standard") == 1.0


def test_disjoint_ties():
    a = net([[0, 1, 0], [0, 0, 0], [0, 0, 0]])
    b = net([[0, 0, 0], [1, 0, 0], [0, 0, 0]])
    assert network_similarity(a, b, "pairs") == 0
    assert network_similarity(a, b, "standard") == 0


def test_empty_overlap_errors():
    a = net(np.zeros((3, 3)), respondents=["v0"])
    b = net(np.zeros((3, 3)), respondents=["v1"])
    with pytest.raises(ValueError):
        network_similarity(a, b)


def test_similarity_restricted_to_shared_respondents():
    a = net([[0, 1, 1], [1, 0, 0], [0, 0, 0]])
    b = net([[0, 1, 0], [1, 0, 0], [0, 0, 0]], respondents=["v0", "v1"])
    # over {v0, v1}: both have v0->v1 and v1->v0
    assert network_similarity(a, b, "pairs") == 1.0


def test_reciprocity():
    assert reciprocity(net([[0, 1], [1, 0]])) == 1
    assert reciprocity(net([[0, 1], [0, 0]])) == 0
    assert reciprocity(net(np.zeros((3, 3)))) == 0
    assert reciprocity(net([[0, 1, 1], [1, 0, 0], [0, 0, 0]])) == pytest.approx(2 / 3)


def test_network_invariants():
    with pytest.raises(ValueError):
        net([[1, 0], [0, 0]])
    with pytest.raises(ValueError):
        net([[0, 1], [0, 0]], respondents=["v1"])


def _ties():
    rows = []
    for w in (1, 2, 3):
        for ego, alter in [("a", "b"), ("b", "a"), ("a", "c"), ("c", "a"), ("b", "c"), ("c", "b")]:
            v = 1 if (ego, alter) in {("a", "b"), ("b", "a")} else 0
            if w == 2 and (ego, alter) == ("a", "c"):
                v = 1
            rows.append(SurveyTie(w, ego, alter, "friend", v))
            rows.append(SurveyTie(w, ego, alter, "close_friend", int(v and ego == "a")))
    return rows


def _fm():
    keys = [(a, b, p) for a, b in [("a", "b"), ("a", "c"), ("b", "c")] for p in ("P1", "P2")]
    return FeatureMatrix(keys, ["f"], np.arange(len(keys), dtype=float)[:, None])


def test_build_networks_grid():
    nets = build_networks(_ties(), roster=["a", "b", "c"])
    assert len(nets) == 15
    g = similarity_grid(nets)
    assert g.shape == (15, 15)
    assert set(g.index) >= {"friend@1", "close_friend@3"}


def test_friend_labels_skip_wave1_and_map_periods():
    t = build_label_tables(build_networks(_ties()), _fm(), "friend")
    r = t.rows
    assert set(r["wave"]) == {2, 3}
    assert (r.loc[r["wave"] == 2, "period"] == "P1").all()
    assert (r.loc[r["wave"] == 3, "period"] == "P2").all()
    assert len(r) == 2 * 6
    row = r[(r["wave"] == 2) & (r["ego"] == "a") & (r["alter"] == "c")].iloc[0]
    assert row["label"] == 1 and (row["dyad_a"], row["dyad_b"]) == ("a", "c")
    X, y, groups, periods = t.design(_fm())
    assert X.shape == (12, 1) and groups[0].count("|") == 1


def test_close_only_on_friend_rows():
    t = build_label_tables(build_networks(_ties()), _fm(), "close_given_friend")
    r = t.rows
    friends_w2 = {("a", "b"), ("b", "a"), ("a", "c")}
    assert set(zip(r.loc[r.wave == 2, "ego"], r.loc[r.wave == 2, "alter"])) == friends_w2
    assert r.loc[(r.ego == "b"), "label"].eq(0).all()


def test_change_labels():
    t = build_label_tables(build_networks(_ties()), _fm(), "change")
    r = t.rows
    got = r[(r.ego == "a") & (r.alter == "c")].set_index("wave")["label"].to_dict()
    assert got == {1: 1, 2: 1}  # 0 -> 1 -> 0
    assert (r.loc[r.wave == 1, "period"] == "P1").all()
    assert (r.loc[r.wave == 2, "period"] == "P2").all()


def test_unknown_target():
    with pytest.raises(ValueError):
        build_label_tables(build_networks(_ties()), _fm(), "enemy")


def test_nonrespondent_rows_dropped():
    ties = [t for t in _ties() if not (t.wave == 3 and t.ego == "c")]
    t = build_label_tables(build_networks(ties), _fm(), "friend")
    assert not ((t.rows.wave == 3) & (t.rows.ego == "c")).any()
    ch = build_label_tables(build_networks(ties), _fm(), "change")
    assert not ((ch.rows.wave == 2) & (ch.rows.ego == "c")).any()


def test_tie_profile():
    cfg = make_config(days=7)
    starts = cfg.bin_starts()
    n = len(starts)
    nw = net([[0, 1, 1], [1, 0, 0], [0, 0, 0]], nodes=["a", "b", "c"])
    assert tie_class(nw, "a", "b") == "mutual" and tie_class(nw, "a", "c") == "one-way"
    assert tie_class(nw, "b", "c") == "none"

    def series(d, dist):
        on = np.ones(n)
        return DyadSeries(d, starts, np.full(n, dist), {"both_on_campus": on})

    prof = tie_type_distance_profile(
        [series(Dyad("a", "b"), 10.0), series(Dyad("a", "c"), 50.0), series(Dyad("b", "c"), 300.0)], nw, cfg)
    assert list(prof["tie_class"]) == ["mutual", "one-way", "none"]
    assert list(prof["median_distance_m"]) == [10.0, 50.0, 300.0]

    same = tie_type_distance_profile([series(d, 7.0) for d in [Dyad("a", "b"), Dyad("a", "c"), Dyad("b", "c")]],
                                     nw, cfg)
    assert same["median_distance_m"].nunique() == 1
