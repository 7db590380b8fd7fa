"""Raw log parsing and per-device 10-minute timeline grids."""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

MINUTE_MS = 60_000
DAY_MS = 24 * 60 * MINUTE_MS

TIE_TYPES = ("interact", "friend", "close_friend", "advice_personal", "advice_professional")

LOCATION_HEADER = ["device_id", "timestamp_ms", "lat", "lon", "accuracy_m"]
WIFI_HEADER = ["device_id", "timestamp_ms", "hotspot_id"]
SURVEY_HEADER = ["wave", "ego", "alter", "tie_type", "value"]
GRID_HEADER = ["bin_start_ms", "lat", "lon", "hotspot_ids"]

# Thresholds from the published study, used verbatim in static mode.
PAPER_BREAKS = (207.0, 422.0, 626.0, 822.0, 1001.0, 1178.0, 1373.0, 1570.0, 1776.0, 2000.0)


class IngestError(ValueError):
    """Fatal input contract violation (bad header, unreadable config)."""


@dataclass(frozen=True)
class LocationSample:
    device_id: str
    timestamp: int
    latitude: float
    longitude: float
    accuracy: float | None = None


@dataclass(frozen=True)
class WifiObservation:
    device_id: str
    timestamp: int
    hotspot_id: str


@dataclass(frozen=True)
class SurveyTie:
    wave: int
    ego: str
    alter: str
    tie_type: str
    value: int


@dataclass
class StudyConfig:
    """Study window, timing and geography shared by every stage.

    Timestamps are epoch milliseconds (UTC). Geoboxes are
    ``(lat_min, lon_min, lat_max, lon_max)``.
    """

    study_start: int
    study_end: int
    wave_times: tuple[int, int, int]
    exclusion_windows: list[tuple[int, int]] = field(default_factory=list)
    bin_width: int = 10 * MINUTE_MS
    timezone: str = "UTC"
    campus_geobox: tuple[float, float, float, float] | None = None
    house_geobox: tuple[float, float, float, float] | None = None
    house_hotspots: list[str] = field(default_factory=list)
    distance_elbow: float = 2000.0
    threshold_mode: str = "cluster"
    static_thresholds: list[float] = field(default_factory=lambda: list(PAPER_BREAKS))
    n_thresholds: int = 10
    roster: list[str] | None = None

    def __post_init__(self):
        self.wave_times = tuple(int(t) for t in self.wave_times)
        self.exclusion_windows = [(int(s), int(e)) for s, e in self.exclusion_windows]
        for name in ("campus_geobox", "house_geobox"):
            box = getattr(self, name)
            if box is not None:
                setattr(self, name, tuple(float(v) for v in box))
        self.static_thresholds = [float(v) for v in self.static_thresholds]
        self.validate()

    def validate(self):
        if self.study_end <= self.study_start:
            raise IngestError("study_end must be after study_start")
        if len(self.wave_times) != 3 or not (
            self.wave_times[0] < self.wave_times[1] < self.wave_times[2]
        ):
            raise IngestError("wave_times must be 3 strictly increasing timestamps")
        if self.bin_width <= 0 or DAY_MS % self.bin_width:
            raise IngestError("bin_width must divide 24h")
        for s, e in self.exclusion_windows:
            if not (self.study_start <= s < e <= self.study_end):
                raise IngestError(f"exclusion window [{s}, {e}) outside the study window")
        if self.threshold_mode not in ("cluster", "static"):
            raise IngestError(f"unknown threshold_mode {self.threshold_mode!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["wave_times"] = list(self.wave_times)
        d["exclusion_windows"] = [list(w) for w in self.exclusion_windows]
        for name in ("campus_geobox", "house_geobox"):
            if d[name] is not None:
                d[name] = list(d[name])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise IngestError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise IngestError(f"bad config: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "StudyConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise IngestError(f"cannot read config {path}: {exc}") from exc

    def dump_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def bin_starts(self) -> np.ndarray:
        """Shared grid index: whole bins in the study window minus exclusions."""
        n = (self.study_end - self.study_start) // self.bin_width
        starts = self.study_start + self.bin_width * np.arange(n, dtype=np.int64)
        keep = np.ones(n, dtype=bool)
        for s, e in self.exclusion_windows:
            keep &= ~((starts < e) & (starts + self.bin_width > s))
        return starts[keep]

    def periods(self) -> dict[str, tuple[int, int]]:
        w = self.wave_times
        return {"P1": (w[0], w[1]), "P2": (w[1], w[2])}


@dataclass
class IngestReport:
    rejected: list[tuple[str, int, str]] = field(default_factory=list)
    filtered: dict[str, int] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def reject(self, source, line, reason):
        self.rejected.append((source, line, reason))

    def to_dict(self) -> dict:
        return {
            "counts": dict(sorted(self.counts.items())),
            "filtered": dict(sorted(self.filtered.items())),
            "rejected": [{"file": f, "line": n, "reason": r} for f, n, r in self.rejected],
            "warnings": list(self.warnings),
        }


@dataclass
class TimelineGrid:
    """One device on the shared bin index; NaN lat/lon marks a missing bin."""

    device_id: str
    bin_starts: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    hotspots: list[frozenset]

    @property
    def located(self) -> np.ndarray:
        return ~np.isnan(self.lat)

    @property
    def scanned(self) -> np.ndarray:
        return np.fromiter((len(h) > 0 for h in self.hotspots), bool, len(self.hotspots))

    @property
    def empty(self) -> bool:
        return not self.located.any() and not self.scanned.any()

    def __len__(self):
        return len(self.bin_starts)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(GRID_HEADER)
            for t, la, lo, hs in zip(self.bin_starts, self.lat, self.lon, self.hotspots):
                w.writerow([
                    int(t),
                    "" if math.isnan(la) else repr(float(la)),
                    "" if math.isnan(lo) else repr(float(lo)),
                    ";".join(sorted(hs)),
                ])

    @classmethod
    def from_csv(cls, path, device_id=None) -> "TimelineGrid":
        path = Path(path)
        starts, lat, lon, hot = [], [], [], []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != GRID_HEADER:
                raise IngestError(f"{path}: bad grid header {header}")
            for row in reader:
                starts.append(int(row[0]))
                lat.append(float(row[1]) if row[1] else np.nan)
                lon.append(float(row[2]) if row[2] else np.nan)
                hot.append(frozenset(h for h in row[3].split(";") if h))
        return cls(
            device_id=device_id if device_id is not None else path.stem,
            bin_starts=np.asarray(starts, dtype=np.int64),
            lat=np.asarray(lat, dtype=float),
            lon=np.asarray(lon, dtype=float),
            hotspots=hot,
        )


def _open_rows(path, header, source, report):
    """Yield (line_no, row) after checking the header; empty file yields nothing."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            return
        first = [c.strip() for c in first]
        # accuracy_m column is optional
        if first != header and not (source == "locations" and first == header[:-1]):
            raise IngestError(f"{path}: unparseable header {first}, expected {header}")
        width = len(first)
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                report.reject(source, reader.line_num, f"expected {width} fields, got {len(row)}")
                continue
            yield reader.line_num, [c.strip() for c in row]


def _read_locations(path, config, report, min_accuracy=None):
    out = []
    out_of_window = 0
    for line, row in _open_rows(path, LOCATION_HEADER, "locations", report):
        try:
            dev = row[0]
            ts = int(row[1])
            lat = float(row[2])
            lon = float(row[3])
            acc = float(row[4]) if len(row) > 4 and row[4] else None
        except ValueError as exc:
            report.reject("locations", line, f"unparseable value: {exc}")
            continue
        if not dev:
            report.reject("locations", line, "empty device_id")
        elif not (-90.0 <= lat <= 90.0) or math.isnan(lat):
            report.reject("locations", line, f"latitude out of range: {lat}")
        elif not (-180.0 <= lon <= 180.0) or math.isnan(lon):
            report.reject("locations", line, f"longitude out of range: {lon}")
        elif not (config.study_start <= ts < config.study_end):
            out_of_window += 1
        elif min_accuracy is not None and (acc is None or acc > min_accuracy):
            report.filtered["locations_low_accuracy"] = (
                report.filtered.get("locations_low_accuracy", 0) + 1
            )
        else:
            out.append(LocationSample(dev, ts, lat, lon, acc))
    report.filtered["locations_out_of_window"] = out_of_window
    if not out:
        msg = f"{path}: no usable location samples"
        report.warnings.append(msg)
        warnings.warn(msg, stacklevel=3)
    return out


def _read_wifi(path, config, report):
    out = []
    out_of_window = 0
    for line, row in _open_rows(path, WIFI_HEADER, "wifi", report):
        try:
            ts = int(row[1])
        except ValueError as exc:
            report.reject("wifi", line, f"unparseable value: {exc}")
            continue
        if not row[0]:
            report.reject("wifi", line, "empty device_id")
        elif not row[2]:
            report.reject("wifi", line, "empty hotspot_id")
        elif not (config.study_start <= ts < config.study_end):
            out_of_window += 1
        else:
            out.append(WifiObservation(row[0], ts, row[2]))
    report.filtered["wifi_out_of_window"] = out_of_window
    return out


def _read_surveys(path, config, report):
    roster = set(config.roster) if config.roster is not None else None
    seen = set()
    out = []
    for line, row in _open_rows(path, SURVEY_HEADER, "surveys", report):
        try:
            wave, ego, alter, tie_type, value = int(row[0]), row[1], row[2], row[3], int(row[4])
        except ValueError as exc:
            report.reject("surveys", line, f"unparseable value: {exc}")
            continue
        key = (wave, ego, alter, tie_type)
        if wave not in (1, 2, 3):
            report.reject("surveys", line, f"wave must be 1, 2 or 3, got {wave}")
        elif not ego or not alter:
            report.reject("surveys", line, "empty node id")
        elif ego == alter:
            report.reject("surveys", line, "ego == alter")
        elif tie_type not in TIE_TYPES:
            report.reject("surveys", line, f"unknown tie_type {tie_type!r}")
        elif value not in (0, 1):
            report.reject("surveys", line, f"value must be 0 or 1, got {value}")
        elif roster is not None and (ego not in roster or alter not in roster):
            report.reject("surveys", line, "node not in roster")
        elif key in seen:
            report.reject("surveys", line, "duplicate (wave, ego, alter, tie_type)")
        else:
            seen.add(key)
            out.append(SurveyTie(wave, ego, alter, tie_type, value))
    return out


def parse_inputs(location_file, wifi_file, survey_file, config: StudyConfig, min_accuracy=None):
    """Read the three CSV inputs.

    Returns ``(samples, wifi_obs, ties, report)``. Row-level problems are
    collected in the report with their line numbers; a bad header raises
    :class:`IngestError`.
    """
    report = IngestReport()
    samples = _read_locations(location_file, config, report, min_accuracy)
    wifi = _read_wifi(wifi_file, config, report) if wifi_file is not None else []
    ties = _read_surveys(survey_file, config, report) if survey_file is not None else []
    report.counts = {
        "locations": len(samples),
        "wifi": len(wifi),
        "surveys": len(ties),
        "rejected": len(report.rejected),
    }
    for f, n, r in report.rejected:
        logger.debug("rejected %s:%d: %s", f, n, r)
    return samples, wifi, ties, report


def _bin_positions(ts: np.ndarray, config: StudyConfig, starts: np.ndarray) -> np.ndarray:
    """Map timestamps to positions in ``starts``; -1 when the bin was excluded."""
    raw = (ts - config.study_start) // config.bin_width
    bin_ts = config.study_start + raw * config.bin_width
    pos = np.searchsorted(starts, bin_ts)
    if not len(starts):
        return np.full(len(ts), -1)
    pos_c = np.minimum(pos, len(starts) - 1)
    ok = (pos < len(starts)) & (starts[pos_c] == bin_ts)
    return np.where(ok, pos_c, -1)


def build_grid(
    samples: Sequence[LocationSample],
    wifi_obs: Sequence[WifiObservation],
    config: StudyConfig,
    devices: Iterable[str] | None = None,
    carry_forward_bins: int = 0,
) -> dict[str, TimelineGrid]:
    """Snap readings onto the shared bin index, one grid per device.

    Within a bin the reading closest to the bin start is kept (ties broken
    by coordinates, so input order never matters). Hotspots are the union
    of detections in the bin. ``carry_forward_bins > 0`` fills up to that
    many bins after a reading with its value (off by default).
    """
    starts = config.bin_starts()
    n = len(starts)
    ids = set(devices) if devices is not None else set()
    ids.update(s.device_id for s in samples)
    ids.update(w.device_id for w in wifi_obs)

    by_dev: dict[str, list[LocationSample]] = {d: [] for d in ids}
    for s in samples:
        by_dev[s.device_id].append(s)
    wifi_by_dev: dict[str, list[WifiObservation]] = {d: [] for d in ids}
    for w in wifi_obs:
        wifi_by_dev[w.device_id].append(w)

    grids = {}
    for dev in sorted(ids):
        lat = np.full(n, np.nan)
        lon = np.full(n, np.nan)
        rows = by_dev[dev]
        if rows and n:
            ts = np.fromiter((s.timestamp for s in rows), np.int64, len(rows))
            la = np.fromiter((s.latitude for s in rows), float, len(rows))
            lo = np.fromiter((s.longitude for s in rows), float, len(rows))
            pos = _bin_positions(ts, config, starts)
            keep = pos >= 0
            ts, la, lo, pos = ts[keep], la[keep], lo[keep], pos[keep]
            order = np.lexsort((lo, la, ts, pos))
            pos_sorted = pos[order]
            first = np.ones(len(order), dtype=bool)
            first[1:] = pos_sorted[1:] != pos_sorted[:-1]
            chosen = order[first]
            lat[pos[chosen]] = la[chosen]
            lon[pos[chosen]] = lo[chosen]
        if carry_forward_bins > 0:
            _carry_forward(lat, lon, starts, config.bin_width, carry_forward_bins)

        hot: list[set] = [set() for _ in range(n)]
        wrows = wifi_by_dev[dev]
        if wrows and n:
            ts = np.fromiter((w.timestamp for w in wrows), np.int64, len(wrows))
            pos = _bin_positions(ts, config, starts)
            for p, w in zip(pos, wrows):
                if p >= 0:
                    hot[p].add(w.hotspot_id)
        grid = TimelineGrid(dev, starts.copy(), lat, lon, [frozenset(h) for h in hot])
        if grid.empty:
            logger.warning("device %s has no readings in the study window", dev)
        grids[dev] = grid
    return grids


def _carry_forward(lat, lon, starts, bin_width, max_bins):
    last = -1
    for i in range(len(lat)):
        if not np.isnan(lat[i]):
            last = i
        elif last >= 0 and (starts[i] - starts[last]) // bin_width <= max_bins:
            lat[i] = lat[last]
            lon[i] = lon[last]


def _missing_runs(missing: np.ndarray) -> np.ndarray:
    """Lengths of maximal runs of True."""
    if not missing.size:
        return np.zeros(0, dtype=np.int64)
    padded = np.concatenate(([False], missing, [False])).astype(np.int8)
    d = np.diff(padded)
    return np.flatnonzero(d == -1) - np.flatnonzero(d == 1)


def coverage_survival(grids) -> list[tuple[int, float]]:
    """Survival curve of uncovered time.

    Each point ``(gap_ms, frac)`` gives the fraction of all device-time that
    lies inside location gaps longer than ``gap_ms``. The first point is at
    0 (all missing time); the curve is right-continuous and reaches 0 at the
    longest gap.
    """
    grids = list(grids.values()) if isinstance(grids, dict) else list(grids)
    if not grids:
        raise ValueError("coverage_survival needs at least one grid")
    total = 0
    lengths = []
    bw = None
    for g in grids:
        total += len(g)
        if len(g) > 1:
            bw = int(np.min(np.diff(g.bin_starts)))
        lengths.append(_missing_runs(~g.located))
    runs = np.concatenate(lengths) if lengths else np.zeros(0, dtype=np.int64)
    if bw is None:
        bw = 1
    if total == 0:
        return [(0, 0.0)]
    points = [0] + sorted(set(int(r) for r in runs))
    out = []
    for x in points:
        out.append((x * bw, float(runs[runs > x].sum()) / total))
    return out


def write_grids(grids: dict[str, TimelineGrid], directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for dev in sorted(grids):
        p = directory / f"{dev}.csv"
        grids[dev].to_csv(p)
        paths.append(p)
    return paths


def read_grids(directory) -> dict[str, TimelineGrid]:
    directory = Path(directory)
    grids = {}
    for p in sorted(directory.glob("*.csv")):
        g = TimelineGrid.from_csv(p)
        grids[g.device_id] = g
    return grids
