"""Cross-validation schemas for dyadic data and the classification metric suite.

The three splitters follow the scikit-learn splitter protocol
(``split(X, y, groups)`` / ``get_n_splits``) so they can be passed to
``cross_val_predict`` and friends:

* :class:`UnrestrictedKFold` assigns every labelled row to a fold
  independently.
* :class:`DyadicKFold` keeps all rows of a dyad (both directions, all
  waves) in one fold; ``groups`` are dyad keys.
* :class:`TemporalBlockSplit` trains on the first period and tests on the
  second; ``groups`` are period labels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from sklearn.model_selection import BaseCrossValidator

from ._random import substream
from ._validation import check_scores_labels

SCHEMAS = ("unrestricted", "dyadic", "temporal_block")


class UnrestrictedKFold(BaseCrossValidator):
    def __init__(self, n_splits=10, random_state=0):
        if n_splits < 2:
            raise ValueError("n_splits must be >= 2")
        self.n_splits = n_splits
        self.random_state = random_state

    def assign(self, n_samples, groups=None):
        rng = substream(self.random_state, "folds")
        return rng.integers(0, self.n_splits, size=n_samples)

    def get_n_splits(self, X=None, y=None, groups=None):
        return self.n_splits

    def split(self, X, y=None, groups=None):
        fold = self.assign(len(X), groups)
        idx = np.arange(len(X))
        for k in range(self.n_splits):
            test = fold == k
            if test.any():
                yield idx[~test], idx[test]


class DyadicKFold(UnrestrictedKFold):
    """Folds over dyads: shuffled dyads dealt round-robin, rows follow their dyad."""

    def assign(self, n_samples, groups=None):
        if groups is None:
            raise ValueError("DyadicKFold needs dyad groups")
        groups = np.asarray(groups)
        uniq, inv = np.unique(groups, return_inverse=True)
        rng = substream(self.random_state, "folds")
        order = rng.permutation(len(uniq))
        dyad_fold = np.empty(len(uniq), dtype=np.int64)
        dyad_fold[order] = np.arange(len(uniq)) % self.n_splits
        return dyad_fold[inv]


class TemporalBlockSplit(BaseCrossValidator):
    """Train on rows of ``train_period``, test on rows of ``test_period``."""

    def __init__(self, train_period="P1", test_period="P2"):
        self.train_period = train_period
        self.test_period = test_period

    def assign(self, n_samples, groups=None):
        if groups is None:
            raise ValueError("TemporalBlockSplit needs period labels as groups")
        periods = np.asarray(groups)
        present = set(np.unique(periods).tolist())
        if not {self.train_period, self.test_period} <= present:
            raise ValueError(f"temporal block split needs rows from both {self.train_period} and "
                             f"{self.test_period}; found {sorted(present)}")
        return np.where(periods == self.train_period, 0, np.where(periods == self.test_period, 1, -1))

    def get_n_splits(self, X=None, y=None, groups=None):
        return 1

    def split(self, X, y=None, groups=None):
        fold = self.assign(len(X), groups)
        idx = np.arange(len(X))
        yield idx[fold == 0], idx[fold == 1]


def make_splitter(schema, k=10, seed=0):
    if schema == "unrestricted":
        return UnrestrictedKFold(k, seed)
    if schema == "dyadic":
        return DyadicKFold(k, seed)
    if schema in ("temporal_block", "temporal"):
        return TemporalBlockSplit()
    raise ValueError(f"unknown CV schema {schema!r}")


@dataclass
class FoldPlan:
    schema: str
    k: int
    assignment: np.ndarray
    seed: int

    def splits(self):
        idx = np.arange(len(self.assignment))
        if self.schema == "temporal_block":
            yield idx[self.assignment == 0], idx[self.assignment == 1]
            return
        for f in range(self.k):
            test = self.assignment == f
            if test.any():
                yield idx[~test], idx[test]

    def to_dict(self):
        return {"schema": self.schema, "k": self.k, "seed": self.seed,
                "assignment": self.assignment.astype(int).tolist()}


def assign_folds(label_table, schema, k=10, seed=0) -> FoldPlan:
    """Fold assignment for every row of a label table."""
    rows = label_table.rows
    if schema in ("temporal_block", "temporal"):
        fold = TemporalBlockSplit().assign(len(rows), rows["period"].to_numpy())
        return FoldPlan("temporal_block", 2, fold, seed)
    if k < 2:
        raise ValueError("k must be >= 2")
    groups = (rows["dyad_a"] + "|" + rows["dyad_b"]).to_numpy()
    fold = make_splitter(schema, k, seed).assign(len(rows), groups)
    return FoldPlan(schema, k, fold, seed)


# ------------------------------------------------------------------ metrics


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @classmethod
    def from_predictions(cls, pred, labels) -> "ConfusionCounts":
        pred = np.asarray(pred).astype(bool)
        labels = np.asarray(labels).astype(bool)
        return cls(int((pred & labels).sum()), int((~pred & ~labels).sum()),
                   int((pred & ~labels).sum()), int((~pred & labels).sum()))

    @property
    def n(self):
        return self.tp + self.tn + self.fp + self.fn


def mcc(counts: ConfusionCounts) -> float:
    """Matthews correlation coefficient; 0 when any marginal is empty."""
    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    # integer products stay exact; one float sqrt at the end
    return (tp * tn - fp * fn) / math.sqrt(denom)


def _ratio(a, b):
    return a / b if b else float("nan")


def auc_score(scores, labels) -> float:
    """P(random positive scores above random negative), ties counted as 1/2."""
    labels = np.asarray(labels).astype(bool)
    n1 = int(labels.sum())
    n0 = len(labels) - n1
    if n1 == 0 or n0 == 0:
        return float("nan")
    ranks = stats.rankdata(scores)
    return float((ranks[labels].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def clopper_pearson(x, n, level=0.95):
    if n == 0:
        return float("nan"), float("nan")
    a = (1.0 - level) / 2.0
    lo = 0.0 if x == 0 else float(stats.beta.ppf(a, x, n - x + 1))
    hi = 1.0 if x == n else float(stats.beta.ppf(1.0 - a, x + 1, n - x))
    return lo, hi


def binomial_vs_nir(correct, n, nir) -> float:
    """One-sided exact p-value P(X >= correct) for X ~ Binomial(n, nir)."""
    if not 0.0 < nir < 1.0:
        raise ValueError("nir must lie strictly between 0 and 1")
    if correct > n:
        raise ValueError("correct cannot exceed n")
    if correct <= 0:
        return 1.0
    return float(stats.binom.sf(correct - 1, n, nir))


def metric_suite(scores, labels, threshold=0.5) -> dict:
    """Confusion counts and derived metrics for scores in [0, 1].

    Rows with ``score >= threshold`` are predicted positive. Undefined
    ratios (no predicted positives, single-class labels) are NaN.
    """
    scores, labels = check_scores_labels(scores, labels)
    pred = scores >= threshold
    c = ConfusionCounts.from_predictions(pred, labels)
    n = c.n
    correct = c.tp + c.tn
    pos_rate = labels.mean() if n else float("nan")
    nir = max(pos_rate, 1.0 - pos_rate) if n else float("nan")
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    f1 = _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn)
    lo, hi = clopper_pearson(correct, n)
    if n and 0.0 < nir < 1.0:
        p = binomial_vs_nir(correct, n, nir)
    else:
        p = float("nan")
    notes = []
    if c.tp + c.fp == 0:
        notes.append("no positive predictions")
    if n and (labels.all() or not labels.any()):
        notes.append("single-class labels: AUC undefined")
    return {
        "n": n,
        "tp": c.tp, "tn": c.tn, "fp": c.fp, "fn": c.fn,
        "accuracy": _ratio(correct, n),
        "accuracy_ci": [lo, hi],
        "nir": nir,
        "binomial_p": p,
        "precision": precision,
        "recall": recall,
        "specificity": _ratio(c.tn, c.tn + c.fp),
        "f1": f1,
        "auc": auc_score(scores, labels) if n else float("nan"),
        "mcc": mcc(c),
        "notes": notes,
    }


def _jsonable(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) else obj
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


@dataclass
class EvalReport:
    target: str
    model: str
    blocks: dict[str, dict] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    ROWS = ("accuracy", "accuracy_ci", "nir", "binomial_p", "precision", "recall",
            "specificity", "f1", "auc", "mcc")

    def to_json(self) -> str:
        d = {"target": self.target, "model": self.model, "meta": self.meta, "cv": self.blocks}
        return json.dumps(_jsonable(d), indent=2, sort_keys=True) + "\n"

    def to_csv_rows(self):
        rows = [["target", "cv", "metric", "value"]]
        for schema, block in self.blocks.items():
            for key in self.ROWS + ("tp", "tn", "fp", "fn", "n"):
                v = block[key]
                if isinstance(v, list):
                    v = ";".join("" if (isinstance(x, float) and math.isnan(x)) else repr(x) for x in v)
                elif isinstance(v, float):
                    v = "" if math.isnan(v) else repr(v)
                rows.append([self.target, schema, key, v])
        return rows
