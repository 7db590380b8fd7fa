"""Random forest and discrete AdaBoost over :class:`MissingAwareTreeClassifier`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_binary_xy, check_features
from .tree import MissingAwareTreeClassifier


def _tree_seeds(random_state, n):
    ss = np.random.SeedSequence(0 if random_state is None else int(random_state))
    return [int(c.generate_state(1)[0]) for c in ss.spawn(n)]


def _fit_one(X, y, seed, bootstrap, params):
    tree = MissingAwareTreeClassifier(random_state=seed, **params)
    if bootstrap:
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, len(y), len(y))
        # bootstrap as integer weights keeps row order and the tree's RNG path stable
        w = np.bincount(idx, minlength=len(y)).astype(float)
        keep = w > 0
        tree.fit(X[keep], y[keep], sample_weight=w[keep])
    else:
        tree.fit(X, y)
    return tree


class MissingAwareForestClassifier(ClassifierMixin, BaseEstimator):
    """Bagged missing-aware trees; ``predict_proba`` is the fraction of tree votes.

    ``max_features="sqrt"`` means ``ceil(sqrt(n_features))`` per split.
    Each tree gets its own seed spawned from ``random_state``, so results
    do not depend on ``n_jobs``.
    """

    def __init__(self, n_estimators=100, max_features="sqrt", max_depth=None, min_samples_leaf=1,
                 bootstrap=True, random_state=0, n_jobs=1):
        self.n_estimators = n_estimators
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        X, y_enc, classes, _ = check_binary_xy(X, y)
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        params = dict(max_features=self.max_features, max_depth=self.max_depth,
                      min_samples_leaf=self.min_samples_leaf)
        seeds = _tree_seeds(self.random_state, self.n_estimators)
        if self.n_jobs and self.n_jobs > 1:
            from joblib import Parallel, delayed

            self.estimators_ = Parallel(n_jobs=self.n_jobs)(
                delayed(_fit_one)(X, y_enc, s, self.bootstrap, params) for s in seeds)
        else:
            self.estimators_ = [_fit_one(X, y_enc, s, self.bootstrap, params) for s in seeds]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "estimators_")
        X = check_features(X)
        votes = np.zeros(len(X))
        for t in self.estimators_:
            if len(t.classes_) == 2:
                votes += t.predict(X)
            else:
                votes += t.classes_[0]
        p = votes / len(self.estimators_)
        if len(self.classes_) == 1:
            return np.ones((len(X), 1))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        proba = self.predict_proba(X)
        if proba.shape[1] == 1:
            return np.repeat(self.classes_, len(proba))
        return self.classes_[(proba[:, 1] >= 0.5).astype(np.int64)]


class MissingAwareAdaBoostClassifier(ClassifierMixin, BaseEstimator):
    """Discrete AdaBoost with depth-limited missing-aware trees.

    Boosting stops early when a round's weighted error is 0 (the perfect
    tree is kept) or at least 0.5 (the round is discarded unless it is the
    first). ``predict_proba`` returns the alpha-weighted vote fraction.
    """

    def __init__(self, n_estimators=50, max_depth=1, min_samples_leaf=1, random_state=0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.random_state = random_state

    def fit(self, X, y):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        X, y_enc, classes, _ = check_binary_xy(X, y)
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        n = len(y_enc)
        w = np.full(n, 1.0 / n)
        seeds = _tree_seeds(self.random_state, self.n_estimators)
        self.estimators_, self.estimator_weights_, self.estimator_errors_ = [], [], []
        self.sample_weight_history_ = [w.copy()]
        self.train_errors_ = []
        score = np.zeros(n)
        sign = 2 * y_enc - 1
        for r in range(self.n_estimators):
            tree = MissingAwareTreeClassifier(max_depth=self.max_depth, min_samples_leaf=self.min_samples_leaf,
                                              random_state=seeds[r]).fit(X, y_enc, sample_weight=w)
            h = tree.predict(X) if len(tree.classes_) == 2 else np.full(n, tree.classes_[0])
            wrong = h != y_enc
            err = float(w[wrong].sum())
            if err >= 0.5 and r > 0:
                break
            if err <= 0.0 or err >= 0.5:
                alpha = 1.0
            else:
                alpha = 0.5 * np.log((1.0 - err) / err)
            self.estimators_.append(tree)
            self.estimator_weights_.append(float(alpha))
            self.estimator_errors_.append(err)
            score += alpha * (2 * h - 1)
            self.train_errors_.append(float(np.mean((score > 0) != (y_enc == 1))))
            if err <= 0.0 or err >= 0.5:
                break
            w = w * np.exp(-alpha * sign * (2 * h - 1))
            w /= w.sum()
            self.sample_weight_history_.append(w.copy())
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "estimators_")
        X = check_features(X)
        pos = np.zeros(len(X))
        total = 0.0
        for tree, a in zip(self.estimators_, self.estimator_weights_):
            h = tree.predict(X) if len(tree.classes_) == 2 else np.full(len(X), tree.classes_[0])
            pos += a * h
            total += a
        p = pos / total
        if len(self.classes_) == 1:
            return np.ones((len(X), 1))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        proba = self.predict_proba(X)
        if proba.shape[1] == 1:
            return np.repeat(self.classes_, len(proba))
        return self.classes_[(proba[:, 1] >= 0.5).astype(np.int64)]
