"""CART-style binary decision tree that accepts NaN as "missing".

At each split the rows with a missing value for the split feature follow
the branch that received more (non-missing) weight; the direction is stored
with the split and reused at prediction time.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_binary_xy, check_features


def resolve_max_features(max_features, n_features):
    if max_features is None:
        return n_features
    if max_features == "sqrt":
        return max(1, math.ceil(math.sqrt(n_features)))
    if max_features == "log2":
        return max(1, math.ceil(math.log2(n_features)))
    if isinstance(max_features, float):
        return max(1, min(n_features, int(math.ceil(max_features * n_features))))
    return max(1, min(n_features, int(max_features)))


def _gini_total(w, p):
    """Weighted Gini impurity times node weight: 2 p (w - p) / w."""
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(w > 0, 2.0 * p * (w - p) / w, 0.0)


def best_splits(X, y, w, min_leaf):
    """Best threshold for every column of ``X`` at once.

    Returns arrays ``(gain, threshold, missing_left)``; ``gain`` is -inf for
    columns with no admissible split (all missing, constant, or leaves too
    small). ``gain`` is the decrease of weighted Gini impurity summed over
    children. Rows missing the column go to the heavier observed side.
    """
    X = np.asarray(X, dtype=float)
    n, m = X.shape
    gain = np.full(m, -np.inf)
    thr = np.full(m, np.nan)
    mleft = np.ones(m, dtype=bool)
    if n < 2 or m == 0:
        return gain, thr, mleft
    y = np.asarray(y, dtype=float)
    miss = np.isnan(X)
    order = np.argsort(X, axis=0, kind="stable")  # NaN sorts last
    xs = np.take_along_axis(X, order, axis=0)
    obs_s = ~np.take_along_axis(miss, order, axis=0)
    ws = np.where(obs_s, w[order], 0.0)
    ps = ws * y[order]
    n_obs = obs_s.sum(axis=0)
    W, P = ws.sum(axis=0), ps.sum(axis=0)
    Wt, Pt = w.sum(), (w * y).sum()
    Wm, Pm = Wt - W, Pt - P
    nm = n - n_obs

    cw = np.cumsum(ws, axis=0)[:-1]
    cp = np.cumsum(ps, axis=0)[:-1]
    cn = np.arange(1, n)[:, None]
    with np.errstate(invalid="ignore"):
        valid = (cn < n_obs) & (xs[1:] != xs[:-1])
    left_heavier = cw >= W - cw
    WL = cw + np.where(left_heavier, Wm, 0.0)
    PL = cp + np.where(left_heavier, Pm, 0.0)
    NL = cn + np.where(left_heavier, nm, 0)
    WR, PR, NR = Wt - WL, Pt - PL, n - NL
    valid &= (NL >= min_leaf) & (NR >= min_leaf)
    ok = valid.any(axis=0)
    if not ok.any():
        return gain, thr, mleft
    parent = 2.0 * Pt * (Wt - Pt) / Wt if Wt > 0 else 0.0
    g = parent - _gini_total(WL, PL) - _gini_total(WR, PR)
    g = np.where(valid, g, -np.inf)
    i = np.argmax(g, axis=0)
    cols = np.arange(m)
    lo, hi = xs[i, cols], xs[np.minimum(i + 1, n - 1), cols]
    with np.errstate(invalid="ignore"):
        t = (lo + hi) / 2.0
        t = np.where(t == hi, lo, t)  # midpoint rounded up onto the right value
    gain = np.where(ok, g[i, cols], -np.inf)
    thr = np.where(ok, t, np.nan)
    mleft = np.where(ok, left_heavier[i, cols], True)
    return gain, thr, mleft


def best_split(x, y, w, min_leaf):
    """Best threshold on one feature as ``(gain, threshold, missing_left)``,
    or ``None`` when the feature offers no admissible split."""
    g, t, ml = best_splits(np.asarray(x, dtype=float)[:, None], y, np.asarray(w, dtype=float), min_leaf)
    if not np.isfinite(g[0]):
        return None
    return float(g[0]), float(t[0]), bool(ml[0])


class MissingAwareTreeClassifier(ClassifierMixin, BaseEstimator):
    """Binary decision tree with weighted Gini splits and missing-value routing.

    Parameters
    ----------
    max_depth : int or None
    min_samples_leaf : int
    min_samples_split : int
    max_features : int, float, "sqrt", "log2" or None
        Features examined per split. Candidates are drawn at random; features
        with no admissible threshold (constant or all missing at the node)
        do not count against the quota.
    random_state : int or None
    """

    def __init__(self, max_depth=None, min_samples_leaf=1, min_samples_split=2, max_features=None,
                 random_state=None):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.random_state = random_state

    def fit(self, X, y, sample_weight=None):
        X, y_enc, classes, w = check_binary_xy(X, y, sample_weight)
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        rng = np.random.default_rng(self.random_state)
        n_try = resolve_max_features(self.max_features, X.shape[1])
        max_depth = np.inf if self.max_depth is None else self.max_depth
        if len(classes) == 1:
            y_enc = np.zeros(len(y_enc), dtype=np.int64)

        feature, threshold, missing_left, left, right, value, weight = [], [], [], [], [], [], []

        def new_node(idx):
            wi = w[idx]
            tot = wi.sum()
            feature.append(-1)
            threshold.append(np.nan)
            missing_left.append(True)
            left.append(-1)
            right.append(-1)
            value.append(float((wi * y_enc[idx]).sum() / tot) if tot > 0 else 0.0)
            weight.append(float(tot))
            return len(feature) - 1

        root = new_node(np.arange(len(y_enc)))
        stack = [(root, np.arange(len(y_enc)), 0)]
        while stack:
            node, idx, depth = stack.pop()
            v = value[node]
            if depth >= max_depth or len(idx) < self.min_samples_split or v in (0.0, 1.0):
                continue
            yi, wi = y_enc[idx].astype(float), w[idx]
            best = None
            order = rng.permutation(X.shape[1])
            # constant or all-missing columns at this node can never split
            Xi = X[idx]
            varies = np.fmax.reduce(Xi, axis=0) > np.fmin.reduce(Xi, axis=0)
            cand = order[varies[order]]
            # take the first n_try admissible candidates in random order
            chosen_g, chosen_f, chosen_t, chosen_m = [], [], [], []
            pos = 0
            need = n_try
            while need > 0 and pos < len(cand):
                chunk = cand[pos:pos + need]
                pos += len(chunk)
                g, t, ml = best_splits(Xi[:, chunk], yi, wi, self.min_samples_leaf)
                adm = np.flatnonzero(np.isfinite(g))[:need]
                need -= len(adm)
                chosen_g.append(g[adm])
                chosen_f.append(chunk[adm])
                chosen_t.append(t[adm])
                chosen_m.append(ml[adm])
            if chosen_g:
                g = np.concatenate(chosen_g)
                if len(g):
                    j = int(np.argmax(g))
                    # zero-gain splits are admissible (greedy CART would otherwise stall on XOR)
                    if g[j] > -1e-12:
                        best = (g[j], int(np.concatenate(chosen_f)[j]), float(np.concatenate(chosen_t)[j]),
                                bool(np.concatenate(chosen_m)[j]))
            if best is None:
                continue
            _, f, thr, mleft = best
            x = X[idx, f]
            go_left = np.where(np.isnan(x), mleft, x <= thr)
            li, ri = idx[go_left], idx[~go_left]
            if not len(li) or not len(ri):
                continue
            feature[node], threshold[node], missing_left[node] = f, thr, mleft
            left[node] = new_node(li)
            right[node] = new_node(ri)
            stack.append((right[node], ri, depth + 1))
            stack.append((left[node], li, depth + 1))

        self.tree_ = {
            "feature": np.asarray(feature, dtype=np.int64),
            "threshold": np.asarray(threshold, dtype=float),
            "missing_left": np.asarray(missing_left, dtype=bool),
            "left": np.asarray(left, dtype=np.int64),
            "right": np.asarray(right, dtype=np.int64),
            "value": np.asarray(value, dtype=float),
            "weight": np.asarray(weight, dtype=float),
        }
        return self

    @property
    def node_count(self):
        check_is_fitted(self, "tree_")
        return len(self.tree_["feature"])

    def get_depth(self):
        t = self.tree_
        depth = np.zeros(len(t["feature"]), dtype=np.int64)
        for i in range(len(depth)):
            if t["feature"][i] >= 0:
                depth[t["left"][i]] = depth[t["right"][i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X):
        """Leaf index reached by each row."""
        check_is_fitted(self, "tree_")
        X = check_features(X)
        t = self.tree_
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = t["feature"][node] >= 0
        while active.any():
            r = rows[active]
            nd = node[r]
            x = X[r, t["feature"][nd]]
            go_left = np.where(np.isnan(x), t["missing_left"][nd], x <= t["threshold"][nd])
            node[r] = np.where(go_left, t["left"][nd], t["right"][nd])
            active = t["feature"][node] >= 0
        return node

    def predict_proba(self, X):
        p = self.tree_["value"][self.apply(X)]
        if len(self.classes_) == 1:
            return np.ones((len(p), 1))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        proba = self.predict_proba(X)
        if proba.shape[1] == 1:
            return np.repeat(self.classes_, len(proba))
        return self.classes_[(proba[:, 1] >= 0.5).astype(np.int64)]
