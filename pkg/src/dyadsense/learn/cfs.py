"""Correlation-based feature selection with best-first search, plus fold-stability voting."""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_binary_xy, check_features
from ..evalkit import DyadicKFold, UnrestrictedKFold


def cfs_merit(subset, r_cf, r_ff) -> float:
    """Merit k * mean(r_cf) / sqrt(k + k (k - 1) * mean(r_ff)) of a feature subset.

    ``r_cf`` holds |correlation| of each feature with the class and ``r_ff``
    the |correlation| matrix between features (or any callable
    ``r_ff(i, j)``).
    """
    subset = list(subset)
    k = len(subset)
    if k == 0:
        return 0.0
    num = float(sum(r_cf[i] for i in subset))
    pair_sum = 0.0
    for a in range(k):
        for b in range(a + 1, k):
            pair_sum += r_ff(subset[a], subset[b]) if callable(r_ff) else r_ff[subset[a], subset[b]]
    # k + k(k-1) * mean_pair == k + 2 * pair_sum
    return num / np.sqrt(k + 2.0 * pair_sum)


class PairwiseCorrelation:
    """|Pearson| correlations with pairwise deletion of missing cells.

    Rows of the feature-feature matrix are computed on demand and cached,
    so wide matrices only pay for the features the search touches.
    Zero-variance pairs get correlation 0.
    """

    def __init__(self, X):
        X = np.asarray(X, dtype=float)
        self.mask = ~np.isnan(X)
        # shift columns by their mean; correlation is shift-invariant and sums stay well-conditioned
        mu = np.nanmean(np.where(self.mask.any(axis=0), X, 0.0), axis=0)
        mu = np.nan_to_num(mu)
        self.X0 = np.where(self.mask, X - mu, 0.0)
        self.M = self.mask.astype(float)
        self._rows: dict[int, np.ndarray] = {}

    @staticmethod
    def _corr(n, sx, sy, sxx, syy, sxy):
        with np.errstate(invalid="ignore", divide="ignore"):
            cov = sxy - sx * sy / n
            vx = sxx - sx * sx / n
            vy = syy - sy * sy / n
            r = cov / np.sqrt(vx * vy)
        scale_ok = (vx > 1e-12 * np.maximum(sxx, 1e-300)) & (vy > 1e-12 * np.maximum(syy, 1e-300))
        r = np.where((n >= 2) & scale_ok & np.isfinite(r), r, 0.0)
        return np.clip(np.abs(r), 0.0, 1.0)

    def with_target(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        y = y - y.mean() if len(y) else y
        M, X0 = self.M, self.X0
        n = M.sum(axis=0)
        return self._corr(n, X0.sum(axis=0), y @ M, (X0 * X0).sum(axis=0), (y * y) @ M, y @ X0)

    def row(self, j) -> np.ndarray:
        r = self._rows.get(j)
        if r is None:
            m = self.M[:, j]
            x = self.X0[:, j]
            M, X0 = self.M, self.X0
            n = m @ M
            r = self._corr(n, x @ M, m @ X0, (x * x) @ M, m @ (X0 * X0), x @ X0)
            r[j] = 1.0 if n[j] >= 2 and np.var(x[m > 0]) > 0 else 0.0
            self._rows[j] = r
        return r

    def __call__(self, i, j) -> float:
        return float(self.row(i)[j])


def best_first_search(r_cf, corr, max_stale=5, candidates=None):
    """Forward best-first search maximising CFS merit.

    The open list is ordered by merit (ties: smaller, then lexicographically
    smaller subset). Search stops after ``max_stale`` consecutive expansions
    that do not improve the best merit found. Returns ``(subset, merit)``.
    """
    r_cf = np.asarray(r_cf, dtype=float)
    p = len(r_cf)
    cand = np.arange(p) if candidates is None else np.asarray(sorted(candidates), dtype=np.int64)
    # state: (neg merit, size, subset tuple, sum r_cf, sum r_ff over pairs)
    start = ()
    open_list = [(-0.0, 0, start, 0.0, 0.0)]
    seen = {start}
    best, best_merit = start, 0.0
    stale = 0
    while open_list and stale < max_stale:
        _, k, subset, s_cf, s_ff = heapq.heappop(open_list)
        in_set = np.zeros(p, dtype=bool)
        in_set[list(subset)] = True
        ext = cand[~in_set[cand]]
        if not ext.size:
            stale += 1
            continue
        add_ff = np.zeros(ext.size)
        for s in subset:
            add_ff += corr.row(s)[ext]
        new_cf = s_cf + r_cf[ext]
        new_ff = s_ff + add_ff
        merits = new_cf / np.sqrt(k + 1 + 2.0 * new_ff)
        improved = False
        for f, m, a, b in zip(ext.tolist(), merits.tolist(), new_cf.tolist(), new_ff.tolist()):
            child = tuple(sorted(subset + (f,)))
            if child in seen:
                continue
            seen.add(child)
            heapq.heappush(open_list, (-m, k + 1, child, a, b))
            if m > best_merit + 1e-12:
                best, best_merit = child, m
                improved = True
        stale = 0 if improved else stale + 1
    return list(best), float(best_merit)


class CFSSelector(SelectorMixin, BaseEstimator):
    """Correlation-based feature selection (point-biserial feature-class correlation).

    Parameters
    ----------
    max_stale : int
        Consecutive non-improving expansions before the search stops.
    """

    def __init__(self, max_stale=5):
        self.max_stale = max_stale

    def fit(self, X, y):
        X, y_enc, _, _ = check_binary_xy(X, y)
        self.n_features_in_ = X.shape[1]
        corr = PairwiseCorrelation(X)
        self.class_correlation_ = corr.with_target(y_enc)
        subset, merit = best_first_search(self.class_correlation_, corr, self.max_stale)
        self.selected_ = np.asarray(sorted(subset), dtype=np.int64)
        self.merit_ = merit
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "selected_")
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[self.selected_] = True
        return mask


def cfs_select(X, y, max_stale=5) -> list[int]:
    return CFSSelector(max_stale).fit(X, y).selected_.tolist()


@dataclass
class SelectionResult:
    fold_sets: list[list[int]]
    counts: np.ndarray
    final: list[int]
    stability_min: int
    feature_names: list[str] | None = None

    def names(self, idx):
        return [self.feature_names[i] for i in idx] if self.feature_names else list(idx)

    def to_json(self) -> str:
        d = {
            "stability_min": self.stability_min,
            "n_folds": len(self.fold_sets),
            "fold_sets": [self.names(s) for s in self.fold_sets],
            "counts": {str(n): int(self.counts[i]) for i, n in zip(range(len(self.counts)),
                                                                     self.names(range(len(self.counts))))
                       if self.counts[i] > 0},
            "final": self.names(self.final),
        }
        return json.dumps(d, indent=2) + "\n"


def stability_select(X, y, k=10, stability_min=9, seed=0, groups=None, max_stale=5,
                     feature_names=None) -> SelectionResult:
    """Run CFS on the training part of each of ``k`` folds and keep features
    chosen in at least ``stability_min`` folds.

    With ``groups`` the folds keep each group intact.
    """
    X = check_features(X)
    y = np.asarray(y)
    splitter = DyadicKFold(k, seed) if groups is not None else UnrestrictedKFold(k, seed)
    fold_sets = []
    counts = np.zeros(X.shape[1], dtype=np.int64)
    for train, _ in splitter.split(X, y, groups):
        sel = cfs_select(X[train], y[train], max_stale)
        fold_sets.append(sel)
        counts[sel] += 1
    final = [int(i) for i in np.flatnonzero(counts >= stability_min)]
    return SelectionResult(fold_sets, counts, final, stability_min,
                           list(feature_names) if feature_names is not None else None)
