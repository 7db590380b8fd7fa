"""Synthetic cohorts with planted friendship structure and co-location behaviour.

Mobility is anchor based: each device spends hour-long blocks at home (the
shared house for residents), at a campus building, or at some other spot.
Friends are moved to each other's place for a block with a probability
that grows with tie strength, which plants the co-location signal the
feature extractor is meant to pick up.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ._random import substream
from .geodyads import Dyad
from .ingest import DAY_MS, MINUTE_MS, TIE_TYPES, StudyConfig
from .networks import TieNetwork

M_PER_DEG_LAT = 111_195.0


@dataclass
class SynthConfig:
    n_nodes: int = 24
    base_tie_prob: float = 0.25
    reciprocity_boost: float = 0.5
    close_fraction: float = 0.4
    change_rate: float = 0.13
    co_location_lift: float = 0.5
    resident_fraction: float = 0.4
    n_buildings: int = 8
    noise_m: float = 15.0
    missing_rate: float = 0.2
    mean_gap_bins: float = 6.0
    wifi_rate: float = 0.7
    response_rate: float = 1.0
    campus_center: tuple[float, float] = (40.4430, -79.9430)
    house_offset_m: tuple[float, float] = (1100.0, 300.0)
    start_ms: int = 1484524800000  # 2017-01-16 00:00 UTC, a Monday
    period_days: int = 28
    break_days: int = 7
    timezone: str = "America/New_York"
    seed: int = 0

    def __post_init__(self):
        for name in ("base_tie_prob", "reciprocity_boost", "close_fraction", "change_rate",
                     "co_location_lift", "resident_fraction", "missing_rate", "wifi_rate", "response_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.n_nodes < 2:
            raise ValueError("need at least two nodes")
        self.campus_center = tuple(self.campus_center)
        self.house_offset_m = tuple(self.house_offset_m)

    @property
    def nodes(self) -> list[str]:
        width = len(str(self.n_nodes - 1))
        return [f"n{i:0{width}d}" for i in range(self.n_nodes)]

    def study_config(self) -> StudyConfig:
        s = self.start_ms
        p = self.period_days * DAY_MS
        b = self.break_days * DAY_MS
        lat0, lon0 = self.campus_center
        dlat = 900.0 / M_PER_DEG_LAT
        dlon = 900.0 / (M_PER_DEG_LAT * np.cos(np.radians(lat0)))
        hlat, hlon = self.house_location()
        h = 60.0 / M_PER_DEG_LAT
        hl = 60.0 / (M_PER_DEG_LAT * np.cos(np.radians(lat0)))
        return StudyConfig(
            study_start=s,
            study_end=s + 2 * p + b,
            wave_times=(s, s + p, s + 2 * p + b),
            exclusion_windows=[(s + p + p // 2, s + p + p // 2 + b)] if b else [],
            timezone=self.timezone,
            campus_geobox=(lat0 - dlat, lon0 - dlon, lat0 + dlat, lon0 + dlon),
            house_geobox=(hlat - h, hlon - hl, hlat + h, hlon + hl),
            house_hotspots=[f"house-ap-{k}" for k in range(3)],
            roster=self.nodes,
        )

    def house_location(self):
        lat0, lon0 = self.campus_center
        dn, de = self.house_offset_m
        return (lat0 + dn / M_PER_DEG_LAT, lon0 + de / (M_PER_DEG_LAT * np.cos(np.radians(lat0))))


# ------------------------------------------------------------------ networks


def _directed_ties(rng, n, p, boost):
    A = np.zeros((n, n), dtype=np.int8)
    iu, ju = np.triu_indices(n, 1)
    a = rng.random(len(iu)) < p
    # reverse tie: copy the forward tie with probability boost, else draw fresh;
    # marginal density stays p
    copy = rng.random(len(iu)) < boost
    fresh = rng.random(len(iu)) < p
    b = np.where(copy, a, fresh)
    flip = rng.random(len(iu)) < 0.5
    A[iu, ju] = np.where(flip, b, a)
    A[ju, iu] = np.where(flip, a, b)
    return A


def generate_networks(config: SynthConfig) -> dict[tuple[int, str], TieNetwork]:
    """Three waves of friend and close-friend networks (plus derived
    interaction and advice networks so every tie type exists)."""
    rng = substream(config.seed, "networks")
    n = config.n_nodes
    nodes = config.nodes
    friend = [_directed_ties(rng, n, config.base_tie_prob, config.reciprocity_boost)]
    close = [(friend[0] & (rng.random((n, n)) < config.close_fraction)).astype(np.int8)]
    for _ in (2, 3):
        prev_f, prev_c = friend[-1], close[-1]
        flip = (rng.random((n, n)) < config.change_rate) & ~np.eye(n, dtype=bool)
        f = np.where(flip, 1 - prev_f, prev_f).astype(np.int8)
        fresh_close = rng.random((n, n)) < config.close_fraction
        c = np.where(prev_f == 1, prev_c, fresh_close).astype(np.int8) & f
        friend.append(f)
        close.append(c.astype(np.int8))

    respond = []
    for _ in range(3):
        r = rng.random(n) < config.response_rate
        respond.append(frozenset(v for v, ok in zip(nodes, r) if ok))
    nets = {}
    for w in range(3):
        resp_mask = np.array([v in respond[w] for v in nodes])
        keep = resp_mask[:, None]
        extra = (rng.random((n, n)) < 0.1) & ~np.eye(n, dtype=bool)
        mats = {
            "friend": friend[w],
            "close_friend": close[w],
            "interact": (friend[w] | extra).astype(np.int8),
            "advice_personal": (close[w] & (rng.random((n, n)) < 0.6)).astype(np.int8),
            "advice_professional": (close[w] & (rng.random((n, n)) < 0.4)).astype(np.int8),
        }
        for tt in TIE_TYPES:
            nets[(w + 1, tt)] = TieNetwork(w + 1, tt, nodes, np.where(keep, mats[tt], 0), respond[w])
    return nets


def survey_rows(networks) -> list[tuple]:
    rows = []
    for (w, tt), net in sorted(networks.items(), key=lambda kv: (kv[0][0], TIE_TYPES.index(kv[0][1]))):
        for ego in sorted(net.respondents):
            for alter in net.nodes:
                if alter != ego:
                    rows.append((w, ego, alter, tt, net.tie(ego, alter)))
    return rows


# -------------------------------------------------------------------- traces


@dataclass
class Traces:
    """Per-bin ground truth of the generator, one row per device."""

    nodes: list[str]
    bin_starts: np.ndarray
    lat: np.ndarray  # (n, T), NaN when the device was off
    lon: np.ndarray
    hotspot: np.ndarray  # (n, T) object, None when no detection
    offsets: np.ndarray  # ms offset of the reading inside its bin
    residents: list[str] = field(default_factory=list)


def _tie_strength(net: TieNetwork, close: TieNetwork | None):
    A = net.adjacency.astype(float)
    mutual = A * A.T
    strength = np.maximum(A, A.T) * 0.5 + mutual * 0.5
    if close is not None:
        C = close.adjacency.astype(float)
        strength += 0.25 * np.maximum(C, C.T)
    return np.minimum(strength, 1.0)


def generate_traces(networks, config: SynthConfig) -> Traces:
    """Location and WiFi readings for every device on the study's 10-minute bins."""
    rng = substream(config.seed, "traces")
    sc = config.study_config()
    nodes = config.nodes
    n = len(nodes)
    starts = sc.bin_starts()
    T = len(starts)
    bph = 60 * MINUTE_MS // sc.bin_width  # bins per hour block
    block = (starts - sc.study_start) // (bph * sc.bin_width)
    blocks, block_inv = np.unique(block, return_inverse=True)
    nb = len(blocks)
    local = pd.to_datetime(sc.study_start + blocks * bph * sc.bin_width, unit="ms", utc=True).tz_convert(sc.timezone)
    hour = np.asarray(local.hour)
    weekend = np.asarray(local.dayofweek) >= 5

    lat0, lon0 = config.campus_center
    cos0 = np.cos(np.radians(lat0))

    def offset(dn, de):
        return lat0 + dn / M_PER_DEG_LAT, lon0 + de / (M_PER_DEG_LAT * cos0)

    # places: 0 = house, 1..B = buildings, B+1..B+n = private homes, then ad-hoc spots
    B = config.n_buildings
    ang = rng.uniform(0, 2 * np.pi, B)
    rad = rng.uniform(100, 700, B)
    places = [config.house_location()] + [offset(r * np.sin(a), r * np.cos(a)) for a, r in zip(ang, rad)]
    ang = rng.uniform(0, 2 * np.pi, n)
    rad = rng.uniform(2500, 6000, n)
    places += [offset(r * np.sin(a), r * np.cos(a)) for a, r in zip(ang, rad)]
    n_fixed = len(places)

    resident = rng.random(n) < config.resident_fraction
    home = np.where(resident, 0, 1 + B + np.arange(n))
    usual = rng.integers(1, B + 1, size=(n, 3))

    place = np.empty((n, nb), dtype=np.int64)
    u = rng.random((n, nb))
    b_pick = np.where(rng.random((n, nb)) < 0.7, usual[np.arange(n)[:, None], rng.integers(0, 3, (n, nb))],
                      rng.integers(1, B + 1, (n, nb)))
    spot = n_fixed + np.arange(n * nb).reshape(n, nb)
    night = (hour < 7) | (hour >= 23)
    class_hours = (~weekend) & (hour >= 9) & (hour < 17)
    for j in range(nb):
        if night[j]:
            place[:, j] = home
        elif class_hours[j]:
            place[:, j] = np.where(u[:, j] < 0.85, b_pick[:, j], spot[:, j])
        else:
            p_home, p_campus = (0.5, 0.2) if weekend[j] else (0.4, 0.3)
            place[:, j] = np.where(u[:, j] < p_home, home,
                                   np.where(u[:, j] < p_home + p_campus, b_pick[:, j], spot[:, j]))

    spot_ang = rng.uniform(0, 2 * np.pi, n * nb)
    spot_rad = rng.uniform(1500, 8000, n * nb)

    # planted co-location: per period, the wave whose tie it predicts
    periods = sc.periods()
    for label, wave in (("P1", 2), ("P2", 3)):
        lo, hi = periods[label]
        in_period = (blocks * bph * sc.bin_width + sc.study_start >= lo) & (blocks * bph * sc.bin_width + sc.study_start < hi)
        strength = _tie_strength(networks[(wave, "friend")], networks.get((wave, "close_friend")))
        iu, ju = np.nonzero(np.triu(strength, 1))
        if not len(iu) or config.co_location_lift == 0:
            continue
        meet = rng.random((len(iu), nb)) < (config.co_location_lift * strength[iu, ju])[:, None]
        meet &= in_period[None, :]
        # one meeting per person per block, so copies never chain through third parties
        busy = np.zeros((n, nb), dtype=bool)
        for d in rng.permutation(len(iu)):
            i, j = iu[d], ju[d]
            cols = np.flatnonzero(meet[d] & ~busy[i] & ~busy[j])
            busy[i, cols] = busy[j, cols] = True
            if rng.random() < 0.5:
                i, j = j, i
            place[j, cols] = place[i, cols]

    # coordinates per (device, block), then per bin with noise
    fixed = np.asarray(places)
    is_spot = place >= n_fixed
    lat_b = np.empty((n, nb))
    lon_b = np.empty((n, nb))
    lat_b[~is_spot] = fixed[place[~is_spot], 0]
    lon_b[~is_spot] = fixed[place[~is_spot], 1]
    sp = place[is_spot] - n_fixed
    la, lo_ = offset(spot_rad[sp] * np.sin(spot_ang[sp]), spot_rad[sp] * np.cos(spot_ang[sp]))
    lat_b[is_spot], lon_b[is_spot] = la, lo_

    lat = lat_b[:, block_inv] + rng.normal(0, config.noise_m, (n, T)) / M_PER_DEG_LAT
    lon = lon_b[:, block_inv] + rng.normal(0, config.noise_m, (n, T)) / (M_PER_DEG_LAT * cos0)
    place_bin = place[:, block_inv]

    on = _on_mask(rng, n, T, config.missing_rate, config.mean_gap_bins)
    lat[~on] = np.nan
    lon[~on] = np.nan

    detect = on & (rng.random((n, T)) < config.wifi_rate)
    floor = rng.integers(0, 3, n)
    hotspot = np.full((n, T), None, dtype=object)
    for i in range(n):
        cols = np.flatnonzero(detect[i])
        pl = place_bin[i, cols]
        names = np.where(pl == 0, f"house-ap-{floor[i]}",
                         np.char.add("ap-", pl.astype(str)))
        hotspot[i, cols] = names
    offsets = rng.integers(0, sc.bin_width, (n, T))
    return Traces(nodes, starts, lat, lon, hotspot, offsets,
                  residents=[v for v, r in zip(nodes, resident) if r])


def _on_mask(rng, n, T, missing_rate, mean_gap):
    """Two-state Markov on/off process with stationary off-fraction ``missing_rate``."""
    if missing_rate <= 0:
        return np.ones((n, T), dtype=bool)
    if missing_rate >= 1:
        return np.zeros((n, T), dtype=bool)
    p_back = 1.0 / max(mean_gap, 1.0)
    p_off = p_back * missing_rate / (1.0 - missing_rate)
    on = np.empty((n, T), dtype=bool)
    state = rng.random(n) >= missing_rate
    draws = rng.random((n, T))
    for t in range(T):
        state = np.where(state, draws[:, t] >= p_off, draws[:, t] < p_back)
        on[:, t] = state
    return on


# ------------------------------------------------------------------ outputs


def write_cohort(out_dir, config: SynthConfig):
    """Write locations.csv, wifi.csv, surveys.csv, config.json and ground_truth.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    nets = generate_networks(config)
    tr = generate_traces(nets, config)
    sc = config.study_config()
    with open(out / "locations.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["device_id", "timestamp_ms", "lat", "lon", "accuracy_m"])
        for i, dev in enumerate(tr.nodes):
            for t in np.flatnonzero(~np.isnan(tr.lat[i])):
                w.writerow([dev, int(tr.bin_starts[t] + tr.offsets[i, t]), repr(float(tr.lat[i, t])),
                            repr(float(tr.lon[i, t])), repr(float(config.noise_m))])
    with open(out / "wifi.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["device_id", "timestamp_ms", "hotspot_id"])
        for i, dev in enumerate(tr.nodes):
            for t in np.flatnonzero(tr.hotspot[i] != None):  # noqa: E711
                w.writerow([dev, int(tr.bin_starts[t] + tr.offsets[i, t]), tr.hotspot[i, t]])
    with open(out / "surveys.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["wave", "ego", "alter", "tie_type", "value"])
        w.writerows(survey_rows(nets))
    sc.dump_json(out / "config.json")
    truth = {
        "synth_config": asdict(config),
        "residents": tr.residents,
        "ties": {f"{tt}@{w}": [[e, a] for e in net.nodes for a in net.nodes
                                if e != a and net.tie(e, a)]
                 for (w, tt), net in sorted(nets.items()) if tt in ("friend", "close_friend")},
        "respondents": {str(w): sorted(nets[(w, "friend")].respondents) for w in (1, 2, 3)},
    }
    with open(out / "ground_truth.json", "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return nets, tr


def traces_to_grids(traces: Traces, study: StudyConfig):
    """Grids straight from generator output (bypasses CSV round trip)."""
    from .ingest import TimelineGrid

    grids = {}
    for i, dev in enumerate(traces.nodes):
        hs = [frozenset() if h is None else frozenset([h]) for h in traces.hotspot[i]]
        grids[dev] = TimelineGrid(dev, traces.bin_starts.copy(), traces.lat[i].copy(), traces.lon[i].copy(), hs)
    return grids


# -------------------------------------------------------------- leakage demo


@dataclass
class LeakageDataset:
    X: np.ndarray
    y: np.ndarray
    groups: np.ndarray
    periods: np.ndarray
    n_dyads: int


def leakage_fixture(n_nodes=30, n_features=20, signal=0.6, tie_prob=0.3, change_rate=0.13,
                    seed=0) -> LeakageDataset:
    """Perfectly reciprocated ties; both directions of a dyad share one feature row.

    Each (dyad, period) feature vector is a dyad-specific latent offset plus
    ``signal`` times the label plus noise, so the label is only moderately
    recoverable while an exact copy of the row leaks it completely.
    """
    rng = substream(seed, "leakage")
    nodes = [f"n{i:03d}" for i in range(n_nodes)]
    dyads = [Dyad(nodes[i], nodes[j]) for i in range(n_nodes) for j in range(i + 1, n_nodes)]
    m = len(dyads)
    lab2 = (rng.random(m) < tie_prob).astype(np.int64)
    flip = rng.random(m) < change_rate
    lab3 = np.where(flip, 1 - lab2, lab2)
    latent = rng.normal(0, 1, (m, n_features))
    X_rows, y, groups, periods = [], [], [], []
    for period, lab in (("P1", lab2), ("P2", lab3)):
        feats = latent + signal * lab[:, None] + rng.normal(0, 1, (m, n_features))
        for d in range(m):
            key = f"{dyads[d].a}|{dyads[d].b}"
            for _ in range(2):  # ego -> alter and alter -> ego
                X_rows.append(feats[d])
                y.append(lab[d])
                groups.append(key)
                periods.append(period)
    return LeakageDataset(np.asarray(X_rows), np.asarray(y), np.asarray(groups), np.asarray(periods), m)
