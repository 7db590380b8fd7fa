"""Input validation helpers shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array, check_X_y


def check_weighted_1d(values, weights=None, drop_nan=False):
    values = np.asarray(values, dtype=float).reshape(-1)
    if weights is None:
        weights = np.ones_like(values)
    else:
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if weights.shape != values.shape:
            raise ValueError(f"weights shape {weights.shape} != values shape {values.shape}")
    if drop_nan:
        keep = ~np.isnan(values)
        values, weights = values[keep], weights[keep]
    elif np.isnan(values).any():
        raise ValueError("values contain NaN")
    if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
        raise ValueError("weights must be finite and > 0")
    return values, weights


def check_features(X):
    """2-D float array; NaN is allowed and means missing, infinities are not."""
    return check_array(X, dtype=np.float64, ensure_all_finite="allow-nan")


def check_binary_xy(X, y, sample_weight=None):
    X, y = check_X_y(X, y, dtype=np.float64, ensure_all_finite="allow-nan")
    classes, y_enc = np.unique(y, return_inverse=True)
    if len(classes) > 2:
        raise ValueError(f"only binary targets are supported, got classes {classes}")
    if sample_weight is None:
        sample_weight = np.ones(len(y))
    else:
        sample_weight = np.asarray(sample_weight, dtype=float)
        if sample_weight.shape != (len(y),) or np.any(sample_weight < 0):
            raise ValueError("sample_weight must be a non-negative vector matching y")
    return X, y_enc.astype(np.int64), classes, sample_weight


def check_scores_labels(scores, labels):
    scores = np.asarray(scores, dtype=float).reshape(-1)
    labels = np.asarray(labels).reshape(-1).astype(np.int64)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    if np.any(np.isnan(scores)) or np.any((scores < 0) | (scores > 1)):
        raise ValueError("scores must lie in [0, 1]")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    return scores, labels
