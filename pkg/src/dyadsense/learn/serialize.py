"""Self-describing JSON documents for fitted tree models."""

import json

import numpy as np

from .ensemble import MissingAwareAdaBoostClassifier, MissingAwareForestClassifier
from .tree import MissingAwareTreeClassifier

FORMAT = "dyadsense-model/1"


def _tree_dict(tree):
    t = tree.tree_
    return {
        "classes": tree.classes_.tolist(),
        "n_features": int(tree.n_features_in_),
        "feature": t["feature"].tolist(),
        "threshold": [None if np.isnan(v) else float(v) for v in t["threshold"]],
        "missing_left": t["missing_left"].tolist(),
        "left": t["left"].tolist(),
        "right": t["right"].tolist(),
        "value": t["value"].tolist(),
        "weight": t["weight"].tolist(),
    }


def _tree_from(d, params=None):
    tree = MissingAwareTreeClassifier(**(params or {}))
    tree.classes_ = np.asarray(d["classes"])
    tree.n_features_in_ = d["n_features"]
    tree.tree_ = {
        "feature": np.asarray(d["feature"], dtype=np.int64),
        "threshold": np.asarray([np.nan if v is None else v for v in d["threshold"]], dtype=float),
        "missing_left": np.asarray(d["missing_left"], dtype=bool),
        "left": np.asarray(d["left"], dtype=np.int64),
        "right": np.asarray(d["right"], dtype=np.int64),
        "value": np.asarray(d["value"], dtype=float),
        "weight": np.asarray(d["weight"], dtype=float),
    }
    return tree


def model_to_dict(model, feature_names=None, schema_hash=None) -> dict:
    doc = {"format": FORMAT, "params": model.get_params(), "classes": model.classes_.tolist(),
           "feature_names": list(feature_names) if feature_names is not None else None,
           "schema_hash": schema_hash}
    if isinstance(model, MissingAwareTreeClassifier):
        doc["kind"] = "tree"
        doc["trees"] = [_tree_dict(model)]
    elif isinstance(model, MissingAwareForestClassifier):
        doc["kind"] = "forest"
        doc["trees"] = [_tree_dict(t) for t in model.estimators_]
    elif isinstance(model, MissingAwareAdaBoostClassifier):
        doc["kind"] = "adaboost"
        doc["trees"] = [_tree_dict(t) for t in model.estimators_]
        doc["estimator_weights"] = list(model.estimator_weights_)
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    return doc


def model_from_dict(doc):
    if doc.get("format") != FORMAT:
        raise ValueError(f"unsupported model format {doc.get('format')!r}")
    kind = doc["kind"]
    if kind == "tree":
        model = _tree_from(doc["trees"][0], doc["params"])
        return model
    if kind == "forest":
        model = MissingAwareForestClassifier(**doc["params"])
        model.estimators_ = [_tree_from(t) for t in doc["trees"]]
    elif kind == "adaboost":
        model = MissingAwareAdaBoostClassifier(**doc["params"])
        model.estimators_ = [_tree_from(t) for t in doc["trees"]]
        model.estimator_weights_ = list(doc["estimator_weights"])
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    model.classes_ = np.asarray(doc["classes"])
    model.n_features_in_ = doc["trees"][0]["n_features"]
    return model


def save_model(model, path, feature_names=None, schema_hash=None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model, feature_names, schema_hash), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
