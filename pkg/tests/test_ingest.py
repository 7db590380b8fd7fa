import json
import random

import numpy as np
import pytest

from conftest import DAY_MS, MINUTE_MS, T0, make_config, write_csv
from dyadsense.ingest import (
    IngestError,
    LocationSample,
    StudyConfig,
    TimelineGrid,
    WifiObservation,
    build_grid,
    coverage_survival,
    parse_inputs,
    read_grids,
    write_grids,
)

LOC_HEAD = "device_id,timestamp_ms,lat,lon,accuracy_m"


def test_bad_latitude_rejected_with_line_number(tmp_path, day_config):
    loc = write_csv(tmp_path / "l.csv", [
        LOC_HEAD,
        f"a,{T0 + 1000},40.0,-79.0,5",
        f"a,{T0 + 2000},95.0,-79.0,5",
        f"b,{T0 + 3000},40.1,-79.1,",
    ])
    samples, wifi, ties, rep = parse_inputs(loc, None, None, day_config)
    assert len(samples) == 2
    assert len(rep.rejected) == 1
    src, line, reason = rep.rejected[0]
    assert (src, line) == ("locations", 3)
    assert "latitude" in reason
    assert samples[1].accuracy is None


def test_empty_location_file_warns(tmp_path, day_config):
    loc = write_csv(tmp_path / "l.csv", [LOC_HEAD])
    with pytest.warns(UserWarning):
        samples, _, _, rep = parse_inputs(loc, None, None, day_config)
    assert samples == []
    assert rep.warnings


def test_self_tie_rejected(tmp_path, day_config):
    loc = write_csv(tmp_path / "l.csv", [LOC_HEAD, f"a,{T0},40,-79,"])
    surv = write_csv(tmp_path / "s.csv", ["wave,ego,alter,tie_type,value", "1,a,a,friend,1", "1,a,b,friend,1",
                                           "1,a,b,friend,0", "4,a,b,friend,1", "1,a,b,enemy,1"])
    _, _, ties, rep = parse_inputs(loc, None, surv, day_config)
    assert len(ties) == 1
    reasons = [r for _, _, r in rep.rejected]
    assert any("ego == alter" in r for r in reasons)
    assert any("duplicate" in r for r in reasons)
    assert len(rep.rejected) == 4


def test_roster_validation(tmp_path):
    cfg = make_config(roster=["a", "b"])
    loc = write_csv(tmp_path / "l.csv", [LOC_HEAD])
    surv = write_csv(tmp_path / "s.csv", ["wave,ego,alter,tie_type,value", "1,a,c,friend,1"])
    with pytest.warns(UserWarning):
        _, _, ties, rep = parse_inputs(loc, None, surv, cfg)
    assert ties == [] and "roster" in rep.rejected[0][2]


def test_bad_header_is_fatal(tmp_path, day_config):
    loc = write_csv(tmp_path / "l.csv", ["device,time,lat,lon"])
    with pytest.raises(IngestError):
        parse_inputs(loc, None, None, day_config)


def test_config_invariants():
    with pytest.raises(IngestError):
        make_config(wave_times=(T0 + 5, T0 + 5, T0 + 9))
    with pytest.raises(IngestError):
        make_config(bin_width=7 * MINUTE_MS)
    with pytest.raises(IngestError):
        make_config(exclusion_windows=[(T0 - 1, T0 + 10)])
    with pytest.raises(IngestError):
        StudyConfig.from_dict({"study_start": 0, "study_end": 1, "wave_times": [0, 1, 2], "colour": 1})


def test_config_json_roundtrip(tmp_path):
    cfg = make_config(campus_geobox=(1, 2, 3, 4), exclusion_windows=[(T0 + 60_000 * 60, T0 + 60_000 * 120)])
    cfg.dump_json(tmp_path / "c.json")
    assert StudyConfig.from_json(tmp_path / "c.json") == cfg


def test_nearest_to_bin_start_wins(day_config):
    s = [LocationSample("a", T0 + 9 * MINUTE_MS, 2.0, 2.0), LocationSample("a", T0 + 1 * MINUTE_MS, 1.0, 1.0)]
    g = build_grid(s, [], day_config)["a"]
    assert g.lat[0] == 1.0 and g.lon[0] == 1.0
    assert np.isnan(g.lat[1:]).all()


def test_equal_time_tie_is_order_independent(day_config):
    s = [LocationSample("a", T0 + 60_000, 2.0, 2.0), LocationSample("a", T0 + 60_000, 1.0, 1.0)]
    g1 = build_grid(s, [], day_config)["a"]
    g2 = build_grid(s[::-1], [], day_config)["a"]
    assert g1.lat[0] == g2.lat[0]


def test_exclusion_window_removes_bins():
    cfg = make_config(exclusion_windows=[(T0 + 6 * 3_600_000, T0 + 12 * 3_600_000)])
    starts = cfg.bin_starts()
    assert len(starts) == 144 - 36
    for s, e in cfg.exclusion_windows:
        assert not ((starts >= s) & (starts < e)).any()
    s = [LocationSample("a", T0 + 7 * 3_600_000, 1.0, 1.0)]
    g = build_grid(s, [], cfg)["a"]
    assert not g.located.any()


def test_every_ten_minutes_one_day(day_config):
    s = [LocationSample("a", T0 + i * 10 * MINUTE_MS + 30_000, 40.0, -79.0) for i in range(144)]
    g = build_grid(s, [], day_config)["a"]
    assert len(g) == 144
    assert g.located.all()


def test_row_order_independent(day_config):
    rng = random.Random(0)
    s = [LocationSample(rng.choice("abc"), T0 + rng.randrange(DAY_MS), rng.uniform(-1, 1), rng.uniform(-1, 1))
         for _ in range(500)]
    w = [WifiObservation(rng.choice("abc"), T0 + rng.randrange(DAY_MS), f"h{rng.randrange(9)}") for _ in range(300)]
    g1 = build_grid(s, w, day_config)
    rng.shuffle(s)
    rng.shuffle(w)
    g2 = build_grid(s, w, day_config)
    for d in g1:
        np.testing.assert_array_equal(g1[d].lat, g2[d].lat)
        assert g1[d].hotspots == g2[d].hotspots


def test_hotspot_union(day_config):
    w = [WifiObservation("a", T0 + 1000, "x"), WifiObservation("a", T0 + 5000, "y"),
         WifiObservation("a", T0 + 11 * MINUTE_MS, "x")]
    g = build_grid([], w, day_config)["a"]
    assert g.hotspots[0] == {"x", "y"}
    assert g.hotspots[1] == {"x"}
    assert not g.located.any()


def test_roster_device_without_data_is_kept(day_config):
    g = build_grid([], [], day_config, devices=["ghost"])
    assert g["ghost"].empty and len(g["ghost"]) == 144


def test_carry_forward_is_bounded(day_config):
    s = [LocationSample("a", T0, 1.0, 1.0)]
    g = build_grid(s, [], day_config, carry_forward_bins=2)["a"]
    assert g.located[:3].all() and not g.located[3:].any()


def test_grid_csv_roundtrip_is_bit_identical(tmp_path, day_config):
    rng = np.random.default_rng(1)
    s = [LocationSample("dev1", T0 + int(t), float(a), float(b))
         for t, a, b in zip(rng.integers(0, DAY_MS, 50), rng.uniform(-90, 90, 50), rng.uniform(-180, 180, 50))]
    w = [WifiObservation("dev1", T0 + 5, "h;1".replace(";", "_"))]
    grids = build_grid(s, w, day_config)
    write_grids(grids, tmp_path / "g1")
    back = read_grids(tmp_path / "g1")
    write_grids(back, tmp_path / "g2")
    a = (tmp_path / "g1" / "dev1.csv").read_bytes()
    assert a == (tmp_path / "g2" / "dev1.csv").read_bytes()
    np.testing.assert_array_equal(back["dev1"].lat, grids["dev1"].lat)


def _grid_from_mask(located, bw=10 * MINUTE_MS):
    n = len(located)
    lat = np.where(located, 1.0, np.nan)
    return TimelineGrid("x", T0 + bw * np.arange(n), lat, lat.copy(), [frozenset()] * n)


def test_coverage_full_is_zero():
    cov = coverage_survival([_grid_from_mask(np.ones(50, bool))])
    assert all(f == 0 for _, f in cov)


def test_coverage_one_gap_in_eighty_hours():
    located = np.ones(480, bool)
    located[100:148] = False  # 8 hours
    cov = dict(coverage_survival([_grid_from_mask(located)]))
    xs = sorted(cov)
    at = lambda x: cov[max(v for v in xs if v <= x)]
    assert at(4 * 3_600_000) == pytest.approx(0.1)
    assert at(0) == pytest.approx(0.1)
    assert at(8 * 3_600_000) == 0.0


def test_coverage_monotone():
    rng = np.random.default_rng(3)
    grids = [_grid_from_mask(rng.random(300) < 0.7) for _ in range(4)]
    f = [v for _, v in coverage_survival(grids)]
    assert all(a >= b for a, b in zip(f, f[1:]))
    assert f[-1] == 0.0
