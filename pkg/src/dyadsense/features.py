"""Per-(dyad, period) feature vectors from pairwise co-location series.

Every statistic is computed inside each of seven local-time timeframes.
Missing cells are NaN and only arise from absent sensor data; statistics
that are undefined because a criterion was never met (no spans, a single
run, distances under 1 m) are replaced by fixed substitutes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .geodyads import (
    Dyad,
    DyadSeries,
    PreparedGrid,
    binary_series_names,
    build_dyad_series,
)
from .ingest import StudyConfig

INVSQ_CAP = 200.0

TIMEFRAMES = ("all", "weekday", "weekend", "night", "morning", "afternoon", "evening")
CONTINUOUS_STATS = (
    "mean", "median", "sd",
    "log_mean", "log_median", "log_sd",
    "invsq_mean", "invsq_median", "invsq_sd",
)
BINARY_BASE_STATS = ("ones_count", "ones_prop", "defined_count", "missing_count", "transitions")
_RUN_STATS = ("count", "min", "max", "mean", "median", "sd", "sum", "log_mean", "log_median", "log_sd")
SPAN_STATS = tuple(f"span_{s}" for s in _RUN_STATS)
GAP_STATS = tuple(f"gap_{s}" for s in _RUN_STATS)


@dataclass(frozen=True)
class FeatureSchema:
    continuous_series: str = "distance"
    binary_series: tuple[str, ...] = binary_series_names()
    timeframes: tuple[str, ...] = TIMEFRAMES
    continuous_stats: tuple[str, ...] = CONTINUOUS_STATS
    binary_base_stats: tuple[str, ...] = BINARY_BASE_STATS
    span_stats: tuple[str, ...] = SPAN_STATS
    gap_stats: tuple[str, ...] = GAP_STATS

    def __post_init__(self):
        bad = set(self.timeframes) - set(TIMEFRAMES)
        if bad:
            raise ValueError(f"unknown timeframes {sorted(bad)}")
        if len(self.continuous_stats) != 9 or len(self.binary_base_stats) != 5:
            raise ValueError("schema needs 9 continuous and 5 base binary statistics")
        if len(self.span_stats) != 10 or len(self.gap_stats) != 10:
            raise ValueError("schema needs 10 span and 10 gap statistics")

    @classmethod
    def default(cls, wifi=True, n_thresholds=10) -> "FeatureSchema":
        return cls(binary_series=binary_series_names(n_thresholds, wifi=wifi))

    @property
    def binary_stats(self) -> tuple[str, ...]:
        return self.binary_base_stats + self.span_stats + self.gap_stats

    @property
    def per_timeframe(self) -> int:
        return len(self.continuous_stats) + len(self.binary_series) * len(self.binary_stats)

    @property
    def n_features(self) -> int:
        return len(self.timeframes) * self.per_timeframe

    def feature_names(self) -> list[str]:
        names = []
        for tf in self.timeframes:
            names += [f"{self.continuous_series}.{s}.{tf}" for s in self.continuous_stats]
            for series in self.binary_series:
                names += [f"{series}.{s}.{tf}" for s in self.binary_stats]
        return names

    def to_dict(self) -> dict:
        return {
            "continuous_series": self.continuous_series,
            "binary_series": list(self.binary_series),
            "timeframes": list(self.timeframes),
            "continuous_stats": list(self.continuous_stats),
            "binary_base_stats": list(self.binary_base_stats),
            "span_stats": list(self.span_stats),
            "gap_stats": list(self.gap_stats),
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d) -> "FeatureSchema":
        d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items() if k != "n_features"}
        return cls(**d)

    def hash(self) -> str:
        return hashlib.sha256("\n".join(self.feature_names()).encode()).hexdigest()[:16]


# ---------------------------------------------------------------- statistics


def _sd(x):
    return float(np.std(x, ddof=1)) if x.size > 1 else 0.0


def continuous_stats(distances) -> np.ndarray:
    """Nine distance statistics over the defined (non-NaN) bins.

    Log terms use ``log(max(d, 1))`` so sub-metre distances contribute 0;
    inverse-squared terms are capped at 200 (so d = 0 gives 200).
    """
    d = np.asarray(distances, dtype=float)
    d = d[~np.isnan(d)]
    if not d.size:
        return np.full(9, np.nan)
    logd = np.log(np.maximum(d, 1.0))
    with np.errstate(divide="ignore"):
        inv = np.minimum(1.0 / (d * d), INVSQ_CAP)
    return np.array([
        d.mean(), np.median(d), _sd(d),
        logd.mean(), np.median(logd), _sd(logd),
        inv.mean(), np.median(inv), _sd(inv),
    ])


def _segment_breaks(bin_starts, bin_width):
    """True where a bin does not directly follow the previous one in time."""
    brk = np.ones(len(bin_starts), dtype=bool)
    if len(bin_starts) > 1:
        brk[1:] = np.diff(bin_starts) != bin_width
    return brk


def _group_run_stats(lengths, group, n_groups):
    """10 run-length statistics per group; rows of NaN-free zeros for empty groups."""
    out = np.zeros((n_groups, 10))
    if not lengths.size:
        return out
    order = np.lexsort((lengths, group))
    L = lengths[order].astype(float)
    g = group[order]
    cnt = np.bincount(g, minlength=n_groups)
    first = np.concatenate(([0], np.cumsum(cnt)[:-1]))
    has = cnt > 0
    logL = np.log(L)
    s = np.bincount(g, weights=L, minlength=n_groups)
    ls = np.bincount(g, weights=logL, minlength=n_groups)
    c = np.maximum(cnt, 1)
    lo = first + (c - 1) // 2
    hi = first + c // 2
    lo = np.minimum(lo, len(L) - 1)
    hi = np.minimum(hi, len(L) - 1)
    last = np.minimum(first + c - 1, len(L) - 1)

    def sd(x, sum_):
        # two-pass: deviations from the group mean, exact 0 for constant groups
        dev = x - (sum_ / c)[g]
        var = np.bincount(g, weights=dev * dev, minlength=n_groups) / np.maximum(c - 1, 1)
        return np.where(cnt > 1, np.sqrt(var), 0.0)

    out[:, 0] = cnt
    out[:, 1] = np.where(has, L[first.clip(max=len(L) - 1)], 0.0)
    out[:, 2] = np.where(has, L[last], 0.0)
    out[:, 3] = np.where(has, s / c, 0.0)
    out[:, 4] = np.where(has, (L[lo] + L[hi]) / 2.0, 0.0)
    out[:, 5] = sd(L, s)
    out[:, 6] = s
    out[:, 7] = np.where(has, ls / c, 0.0)
    out[:, 8] = np.where(has, (logL[lo] + logL[hi]) / 2.0, 0.0)
    out[:, 9] = sd(logL, ls)
    return out


def binary_stats_matrix(codes: np.ndarray, brk: np.ndarray, in_frame: np.ndarray) -> np.ndarray:
    """25 statistics for each row of ``codes``.

    ``codes`` holds 1/0 for defined bins and -1 for missing or
    out-of-timeframe bins; ``in_frame`` marks, per row, the bins belonging
    to the row's timeframe (so missing in-frame bins can be counted).
    Missing bins, out-of-frame bins and time discontinuities all end a run.
    """
    R, T = codes.shape
    out = np.full((R, 25), np.nan)
    if T == 0:
        return out
    defined = codes >= 0
    ones = (codes == 1).sum(axis=1)
    n_def = defined.sum(axis=1)
    n_miss = (in_frame & ~defined).sum(axis=1)

    new = np.ones((R, T), dtype=bool)
    new[:, 1:] = brk[None, 1:] | (codes[:, 1:] != codes[:, :-1])
    starts = defined & new
    ends = np.zeros((R, T), dtype=bool)
    ends[:, :-1] = new[:, 1:]
    ends[:, -1] = True
    ends &= defined
    trans = (defined[:, 1:] & defined[:, :-1] & ~brk[None, 1:] & (codes[:, 1:] != codes[:, :-1])).sum(axis=1)

    sr, sc = np.nonzero(starts)
    _, ec = np.nonzero(ends)
    lengths = ec - sc + 1
    val = codes[sr, sc].astype(np.int64)
    # group 2r = gaps (0s), 2r + 1 = spans (1s)
    runs = _group_run_stats(lengths, 2 * sr + val, 2 * R)

    ok = n_def > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        base = np.column_stack([ones, ones / n_def, n_def, n_miss, trans]).astype(float)
    out[ok, :5] = base[ok]
    out[ok, 5:15] = runs[1::2][ok]
    out[ok, 15:25] = runs[0::2][ok]
    return out


def binary_stats(series, bin_starts=None, bin_width=1) -> np.ndarray:
    """25 statistics of one binary series (values 1/0, NaN = missing).

    Without ``bin_starts`` the bins are taken as contiguous.
    """
    s = np.asarray(series, dtype=float)
    if bin_starts is None:
        bin_starts = np.arange(len(s)) * bin_width
    codes = np.where(np.isnan(s), -1, s).astype(np.int8)[None, :]
    brk = _segment_breaks(np.asarray(bin_starts), bin_width)
    return binary_stats_matrix(codes, brk, np.ones_like(codes, dtype=bool))[0]


# --------------------------------------------------------------- timeframes


def timeframe_masks(bin_starts, timezone="UTC", timeframes=TIMEFRAMES) -> dict[str, np.ndarray]:
    """Boolean masks over bins, evaluated on local bin-start time."""
    idx = pd.to_datetime(np.asarray(bin_starts, dtype=np.int64), unit="ms", utc=True).tz_convert(timezone)
    hour = np.asarray(idx.hour)
    dow = np.asarray(idx.dayofweek)
    all_ = np.ones(len(hour), dtype=bool)
    masks = {
        "all": all_,
        "weekday": dow < 5,
        "weekend": dow >= 5,
        "night": hour < 6,
        "morning": (hour >= 6) & (hour < 12),
        "afternoon": (hour >= 12) & (hour < 18),
        "evening": hour >= 18,
    }
    return {tf: masks[tf] for tf in timeframes}


@dataclass
class PeriodFrame:
    """Bin selection and timeframe masks for one observation period."""

    label: str
    index: np.ndarray
    bin_starts: np.ndarray
    brk: np.ndarray
    masks: np.ndarray  # (n_timeframes, T)


def period_frames(bin_starts, config: StudyConfig, schema: FeatureSchema, periods=None) -> list[PeriodFrame]:
    periods = config.periods() if periods is None else periods
    bin_starts = np.asarray(bin_starts, dtype=np.int64)
    frames = []
    for label, (lo, hi) in periods.items():
        idx = np.flatnonzero((bin_starts >= lo) & (bin_starts < hi))
        bs = bin_starts[idx]
        m = timeframe_masks(bs, config.timezone, schema.timeframes)
        frames.append(PeriodFrame(
            label, idx, bs, _segment_breaks(bs, config.bin_width),
            np.vstack([m[tf] for tf in schema.timeframes]) if len(schema.timeframes) else np.zeros((0, len(bs)), bool),
        ))
    return frames


# --------------------------------------------------------------- extraction


def extract_frame(ds: DyadSeries, frame: PeriodFrame, schema: FeatureSchema) -> np.ndarray:
    """Feature vector of one dyad over one period, ordered as the schema."""
    F = len(schema.timeframes)
    S = len(schema.binary_series)
    dist = ds.distance[frame.index]
    cont = np.vstack([continuous_stats(dist[frame.masks[f]]) for f in range(F)]) if F else np.zeros((0, 9))

    if S:
        B = np.vstack([ds.binary_series[name][frame.index] for name in schema.binary_series])
        base = np.where(np.isnan(B), -1, B).astype(np.int8)  # (S, T)
        codes = np.where(frame.masks[:, None, :], base[None, :, :], -1).reshape(F * S, -1)
        in_frame = np.repeat(frame.masks, S, axis=0)
        bstats = binary_stats_matrix(codes.astype(np.int8), frame.brk, in_frame).reshape(F, S * 25)
    else:
        bstats = np.zeros((F, 0))
    return np.hstack([cont, bstats]).reshape(-1)


def extract(dyad_series: DyadSeries, schema: FeatureSchema, frames: Sequence[PeriodFrame]):
    """One feature row per period for a dyad: ``[(label, vector), ...]``."""
    return [(fr.label, extract_frame(dyad_series, fr, schema)) for fr in frames]


@dataclass
class FeatureMatrix:
    keys: list[tuple[str, str, str]]
    columns: list[str]
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (len(self.keys), len(self.columns)):
            raise ValueError("values shape does not match keys/columns")
        self._row = {k: i for i, k in enumerate(self.keys)}

    def row_index(self, a, b, period) -> int | None:
        d = Dyad.of(a, b)
        return self._row.get((d.a, d.b, period))

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.values, columns=self.columns)
        df.insert(0, "period", [k[2] for k in self.keys])
        df.insert(0, "dyad_b", [k[1] for k in self.keys])
        df.insert(0, "dyad_a", [k[0] for k in self.keys])
        return df

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, na_rep="", lineterminator="\n")

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        df = pd.read_csv(path, dtype={"dyad_a": str, "dyad_b": str, "period": str}, keep_default_na=False,
                         na_values=[""], float_precision="round_trip")
        head = list(df.columns[:3])
        if head != ["dyad_a", "dyad_b", "period"]:
            raise ValueError(f"{path}: bad feature matrix header {head}")
        cols = list(df.columns[3:])
        vals = df[cols].to_numpy(dtype=float)
        keys = list(zip(df["dyad_a"], df["dyad_b"], df["period"]))
        return cls(keys, cols, vals)

    def select(self, columns: Iterable[str]) -> "FeatureMatrix":
        columns = list(columns)
        pos = {c: i for i, c in enumerate(self.columns)}
        missing = [c for c in columns if c not in pos]
        if missing:
            raise KeyError(f"unknown feature columns: {missing[:5]}")
        return FeatureMatrix(self.keys, columns, self.values[:, [pos[c] for c in columns]], dict(self.meta))


def _extract_chunk(pairs, prepared, thresholds, config, schema, frames):
    rows = []
    for a, b in pairs:
        ds = build_dyad_series(prepared[a], prepared[b], thresholds, config)
        for label, vec in extract(ds, schema, frames):
            rows.append(((ds.dyad.a, ds.dyad.b, label), vec))
    return rows


def extract_matrix(
    prepared: dict[str, PreparedGrid],
    dyads: Sequence[Dyad],
    thresholds: Sequence[float],
    config: StudyConfig,
    schema: FeatureSchema | None = None,
    jobs: int = 1,
) -> FeatureMatrix:
    """Feature rows for every (dyad, period), in dyad then period order."""
    schema = FeatureSchema.default(n_thresholds=len(thresholds)) if schema is None else schema
    if not prepared:
        raise ValueError("no grids to extract from")
    starts = next(iter(prepared.values())).bin_starts
    frames = period_frames(starts, config, schema)
    dyads = sorted(Dyad.of(*d) for d in dyads)
    if jobs > 1 and len(dyads) > 1:
        from joblib import Parallel, delayed

        chunks = [dyads[i::jobs] for i in range(jobs)]
        parts = Parallel(n_jobs=jobs)(
            delayed(_extract_chunk)(c, prepared, thresholds, config, schema, frames) for c in chunks
        )
        rows = sorted((r for p in parts for r in p), key=lambda r: r[0])
    else:
        rows = _extract_chunk(dyads, prepared, thresholds, config, schema, frames)
    keys = [r[0] for r in rows]
    values = np.vstack([r[1] for r in rows]) if rows else np.zeros((0, schema.n_features))
    return FeatureMatrix(keys, schema.feature_names(), values, {"schema_hash": schema.hash()})


def schema_json(schema: FeatureSchema) -> str:
    d = schema.to_dict()
    d["hash"] = schema.hash()
    d["feature_names"] = schema.feature_names()
    return json.dumps(d, indent=2) + "\n"
