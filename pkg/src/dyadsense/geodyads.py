"""Pairwise distance and binary co-location series for device pairs."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .ingest import TimelineGrid, StudyConfig

EARTH_RADIUS_M = 6_371_000.0

REGION_SERIES = ("both_on_campus", "both_in_house")
WIFI_SERIES = ("common_wifi", "common_house_wifi")


def threshold_series_names(n=10):
    return tuple(f"within_t{k}" for k in range(1, n + 1))


def binary_series_names(n_thresholds=10, wifi=True):
    names = threshold_series_names(n_thresholds) + REGION_SERIES
    return names + WIFI_SERIES if wifi else names


class Dyad(NamedTuple):
    """Unordered pair stored in canonical order (a < b)."""

    a: str
    b: str

    @classmethod
    def of(cls, i, j) -> "Dyad":
        if i == j:
            raise ValueError(f"a dyad needs two distinct nodes, got {i!r} twice")
        return cls(i, j) if i < j else cls(j, i)


def haversine(p1, p2) -> float:
    """Great-circle distance in meters between two (lat, lon) points in degrees."""
    return float(haversine_array(p1[0], p1[1], p2[0], p2[1]))


def haversine_array(lat1, lon1, lat2, lon2):
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(v, dtype=float)) for v in (lat1, lon1, lat2, lon2))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    # symmetric in its arguments: sin^2 terms are even, cos product commutes
    h = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def _in_box(lat, lon, box):
    lat_min, lon_min, lat_max, lon_max = box
    with np.errstate(invalid="ignore"):
        return (lat >= lat_min) & (lat <= lat_max) & (lon >= lon_min) & (lon <= lon_max)


@dataclass
class PreparedGrid:
    """Array view of a grid with hotspot sets encoded as sorted int keys."""

    device_id: str
    bin_starts: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    located: np.ndarray
    scanned: np.ndarray
    on_campus: np.ndarray | None
    in_house: np.ndarray | None
    wifi_keys: np.ndarray
    house_keys: np.ndarray

    @classmethod
    def from_grid(cls, grid: TimelineGrid, config: StudyConfig, codebook: dict | None = None):
        codebook = {} if codebook is None else codebook
        house = set(config.house_hotspots)
        keys, hkeys = [], []
        # key = bin * 2**32 + hotspot code; intersection of keys = shared detections
        for i, hs in enumerate(grid.hotspots):
            for h in hs:
                code = codebook.setdefault(h, len(codebook))
                k = (i << 32) | code
                keys.append(k)
                if h in house:
                    hkeys.append(k)
        located = ~np.isnan(grid.lat)
        return cls(
            device_id=grid.device_id,
            bin_starts=grid.bin_starts,
            lat=grid.lat,
            lon=grid.lon,
            located=located,
            scanned=grid.scanned,
            on_campus=None if config.campus_geobox is None else _in_box(grid.lat, grid.lon, config.campus_geobox),
            in_house=None if config.house_geobox is None else _in_box(grid.lat, grid.lon, config.house_geobox),
            wifi_keys=np.unique(np.asarray(keys, dtype=np.int64)),
            house_keys=np.unique(np.asarray(hkeys, dtype=np.int64)),
        )


def prepare_grids(grids: dict[str, TimelineGrid], config: StudyConfig) -> dict[str, PreparedGrid]:
    codebook: dict[str, int] = {}
    return {d: PreparedGrid.from_grid(g, config, codebook) for d, g in sorted(grids.items())}


@dataclass
class DyadSeries:
    """Distance and binary series on a shared bin index (NaN = missing)."""

    dyad: Dyad
    grid_starts: np.ndarray
    distance: np.ndarray
    binary_series: dict[str, np.ndarray] = field(default_factory=dict)

    def to_csv(self, path):
        names = list(self.binary_series)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_start_ms", "distance"] + names)
            cols = [self.binary_series[n] for n in names]
            for i, t in enumerate(self.grid_starts):
                d = self.distance[i]
                row = [int(t), "" if np.isnan(d) else repr(float(d))]
                row += ["" if np.isnan(c[i]) else str(int(c[i])) for c in cols]
                w.writerow(row)


def _shared_bins(keys_a, keys_b, n):
    common = np.intersect1d(keys_a, keys_b, assume_unique=True)
    hit = np.zeros(n, dtype=bool)
    hit[(common >> 32).astype(np.int64)] = True
    return hit


def build_dyad_series(grid_a, grid_b, thresholds: Sequence[float], config: StudyConfig) -> DyadSeries:
    """Derive the pairwise distance series and the binary co-location series.

    Location-derived series are missing wherever either device lacks a
    location; the WiFi series are missing wherever either device has no
    scan in the bin, independently of location.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    if thresholds.ndim != 1 or not thresholds.size or np.any(np.diff(thresholds) <= 0):
        raise ValueError("thresholds must be a non-empty strictly increasing sequence")
    if not isinstance(grid_a, PreparedGrid) or not isinstance(grid_b, PreparedGrid):
        codebook: dict[str, int] = {}
        if not isinstance(grid_a, PreparedGrid):
            grid_a = PreparedGrid.from_grid(grid_a, config, codebook)
        if not isinstance(grid_b, PreparedGrid):
            grid_b = PreparedGrid.from_grid(grid_b, config, codebook)
    if grid_a.device_id > grid_b.device_id:
        grid_a, grid_b = grid_b, grid_a
    if len(grid_a.bin_starts) != len(grid_b.bin_starts) or not np.array_equal(
        grid_a.bin_starts, grid_b.bin_starts
    ):
        raise ValueError(f"grids of {grid_a.device_id} and {grid_b.device_id} are misaligned")

    n = len(grid_a.bin_starts)
    both = grid_a.located & grid_b.located
    dist = np.full(n, np.nan)
    if both.any():
        dist[both] = haversine_array(grid_a.lat[both], grid_a.lon[both], grid_b.lat[both], grid_b.lon[both])

    series: dict[str, np.ndarray] = {}
    for name, thr in zip(threshold_series_names(len(thresholds)), thresholds):
        s = np.full(n, np.nan)
        s[both] = dist[both] <= thr
        series[name] = s
    for name, attr in zip(REGION_SERIES, ("on_campus", "in_house")):
        s = np.full(n, np.nan)
        ma, mb = getattr(grid_a, attr), getattr(grid_b, attr)
        if ma is not None:
            s[both] = (ma & mb)[both]
        series[name] = s

    scanned = grid_a.scanned & grid_b.scanned
    for name, attr in zip(WIFI_SERIES, ("wifi_keys", "house_keys")):
        hit = _shared_bins(getattr(grid_a, attr), getattr(grid_b, attr), n)
        s = np.full(n, np.nan)
        s[scanned] = hit[scanned]
        series[name] = s

    return DyadSeries(Dyad(grid_a.device_id, grid_b.device_id), grid_a.bin_starts, dist, series)


def eligible_dyads(grids, survey_nodes) -> tuple[list[Dyad], dict[str, int]]:
    """Dyads of surveyed nodes whose devices share at least one observed bin.

    A bin counts as shared when both devices have a location, or both have
    a WiFi scan, in it. Returns the dyads and a count summary.
    """
    nodes = sorted(set(survey_nodes))
    potential = len(nodes) * (len(nodes) - 1) // 2
    masks = {}
    for node in nodes:
        g = grids.get(node)
        if g is None:
            continue
        if isinstance(g, PreparedGrid):
            masks[node] = (g.located, g.scanned)
        else:
            masks[node] = (g.located, g.scanned)
    out = []
    for i, j in itertools.combinations(nodes, 2):
        if i in masks and j in masks:
            (la, sa), (lb, sb) = masks[i], masks[j]
            if len(la) == len(lb) and ((la & lb).any() or (sa & sb).any()):
                out.append(Dyad.of(i, j))
    return out, {"nodes": len(nodes), "potential": potential, "eligible": len(out)}
