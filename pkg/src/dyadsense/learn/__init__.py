from .cfs import CFSSelector, PairwiseCorrelation, SelectionResult, best_first_search, cfs_merit, cfs_select, stability_select
from .ensemble import MissingAwareAdaBoostClassifier, MissingAwareForestClassifier
from .serialize import load_model, model_from_dict, model_to_dict, save_model
from .tree import MissingAwareTreeClassifier

__all__ = [
    "CFSSelector",
    "MissingAwareAdaBoostClassifier",
    "MissingAwareForestClassifier",
    "MissingAwareTreeClassifier",
    "PairwiseCorrelation",
    "SelectionResult",
    "best_first_search",
    "cfs_merit",
    "cfs_select",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "save_model",
    "stability_select",
]
