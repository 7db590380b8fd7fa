"""Distance thresholds: weighted survival curve and optimal 1-D clustering.

:class:`DistanceThresholder` wraps the two steps as a transformer: ``fit``
learns the break points from (time-weighted) pairwise distances and
``transform`` turns distances into threshold-membership indicators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_weighted_1d
from .ingest import PAPER_BREAKS


@dataclass(frozen=True)
class ThresholdSet:
    cutoff: float
    breaks: tuple[float, ...]

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        if not b.size or b[0] <= 0 or np.any(np.diff(b) <= 0) or b[-1] != self.cutoff:
            raise ValueError(f"invalid threshold set {self.breaks} (cutoff {self.cutoff})")

    def to_json(self) -> str:
        return json.dumps({"cutoff": self.cutoff, "breaks": list(self.breaks)}, indent=2) + "\n"

    @classmethod
    def from_json(cls, text) -> "ThresholdSet":
        d = json.loads(text)
        return cls(float(d["cutoff"]), tuple(float(v) for v in d["breaks"]))

    @classmethod
    def static(cls, breaks=PAPER_BREAKS) -> "ThresholdSet":
        return cls(float(breaks[-1]), tuple(float(v) for v in breaks))


def eccdf(values, weights=None):
    """Weighted empirical survival function.

    Returns ``(x, s)`` where ``x`` are the sorted distinct values and
    ``s[i]`` is the weighted fraction of samples strictly greater than
    ``x[i]``. Below ``x[0]`` the curve is 1.
    """
    values, weights = check_weighted_1d(values, weights)
    if not values.size:
        raise ValueError("eccdf needs at least one sample")
    x, inv = np.unique(values, return_inverse=True)
    w = np.bincount(inv, weights=weights)
    total = w.sum()
    # strictly-greater mass: total minus cumulative up to and including x[i]
    s = np.clip((total - np.cumsum(w)) / total, 0.0, 1.0)
    s[-1] = 0.0
    return x, s


def survival_at(x, s, v) -> float:
    """Evaluate a survival step curve from :func:`eccdf` at ``v``."""
    i = np.searchsorted(x, v, side="right") - 1
    return 1.0 if i < 0 else float(s[i])


def _prefix(values, weights):
    cw = np.concatenate(([0.0], np.cumsum(weights)))
    cwx = np.concatenate(([0.0], np.cumsum(weights * values)))
    cwx2 = np.concatenate(([0.0], np.cumsum(weights * values * values)))
    return cw, cwx, cwx2


def segment_cost(cw, cwx, cwx2, i, j):
    """Weighted SSE of sorted points i..j-1 (half-open), vectorised over i."""
    w = cw[j] - cw[i]
    sx = cwx[j] - cwx[i]
    sxx = cwx2[j] - cwx2[i]
    with np.errstate(invalid="ignore", divide="ignore"):
        c = sxx - np.where(w > 0, sx * sx / w, 0.0)
    return np.maximum(c, 0.0)


def optimal_partition(values, weights, k):
    """Exact weighted 1-D k-means by dynamic programming.

    ``values`` must be sorted and distinct. Returns ``(cost, starts)`` where
    ``starts`` are the first indices of each of the k contiguous clusters.
    """
    n = len(values)
    cw, cwx, cwx2 = _prefix(values, weights)
    cost = np.full((k + 1, n + 1), np.inf)
    arg = np.zeros((k + 1, n + 1), dtype=np.int64)
    cost[0, 0] = 0.0
    for m in range(1, k + 1):
        for j in range(m, n - (k - m) + 1):
            i = np.arange(m - 1, j)
            cand = cost[m - 1, i] + segment_cost(cw, cwx, cwx2, i, j)
            best = int(np.argmin(cand))
            cost[m, j] = cand[best]
            arg[m, j] = i[best]
    starts = []
    j = n
    for m in range(k, 0, -1):
        i = int(arg[m, j])
        starts.append(i)
        j = i
    return float(cost[k, n]), starts[::-1]


def cluster_1d(values, weights=None, k=10, cutoff=2000.0) -> ThresholdSet:
    """Cluster weighted distances below ``cutoff`` into ``k`` groups.

    Break ``m`` is the midpoint between the largest value of cluster ``m``
    and the smallest of cluster ``m + 1``; the final break is ``cutoff``.
    """
    values, weights = check_weighted_1d(values, weights)
    if k < 1:
        raise ValueError("k must be >= 1")
    keep = values < cutoff
    x, inv = np.unique(values[keep], return_inverse=True)
    w = np.bincount(inv, weights=weights[keep]) if x.size else np.zeros(0)
    if x.size < k:
        raise ValueError(f"need at least {k} distinct values below {cutoff}, got {x.size}")
    _, starts = optimal_partition(x, w, k)
    breaks = [(x[s - 1] + x[s]) / 2.0 for s in starts[1:]]
    breaks.append(float(cutoff))
    return ThresholdSet(float(cutoff), tuple(float(b) for b in breaks))


class DistanceThresholder(TransformerMixin, BaseEstimator):
    """Learn distance thresholds and encode distances as "within" indicators.

    Parameters
    ----------
    n_thresholds : int
        Number of clusters (and thresholds, the last being ``cutoff``).
    cutoff : float
        Elbow distance in meters; only smaller distances are clustered.
    mode : {"cluster", "static"}
        ``static`` skips fitting and uses ``static_breaks``.
    resolution : float or None
        Distances are rounded to this many meters before clustering, which
        bounds the number of distinct values the exact DP has to handle.
    """

    def __init__(self, n_thresholds=10, cutoff=2000.0, mode="cluster", static_breaks=PAPER_BREAKS,
                 resolution=1.0):
        self.n_thresholds = n_thresholds
        self.cutoff = cutoff
        self.mode = mode
        self.static_breaks = static_breaks
        self.resolution = resolution

    def fit(self, X, y=None, sample_weight=None):
        if self.mode == "static":
            self.threshold_set_ = ThresholdSet.static(self.static_breaks)
        elif self.mode == "cluster":
            values, weights = check_weighted_1d(X, sample_weight, drop_nan=True)
            if self.resolution:
                values = np.round(values / self.resolution) * self.resolution
            self.threshold_set_ = cluster_1d(values, weights, self.n_thresholds, self.cutoff)
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        self.breaks_ = np.asarray(self.threshold_set_.breaks)
        return self

    def transform(self, X):
        check_is_fitted(self, "breaks_")
        d = np.asarray(X, dtype=float).reshape(-1)
        out = (d[:, None] <= self.breaks_[None, :]).astype(float)
        out[np.isnan(d)] = np.nan
        return out

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "breaks_")
        return np.asarray([f"within_t{k + 1}" for k in range(len(self.breaks_))], dtype=object)
