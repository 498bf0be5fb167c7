"""Gradient-boosted decision trees for transfer-miss classification."""

from .model import TransferMissBooster
from .search import GridSearchResult, grid_search_cv, stratified_fold_indices
from .trees import FlatTree, grow_tree

__all__ = [
    "FlatTree",
    "GridSearchResult",
    "TransferMissBooster",
    "grid_search_cv",
    "grow_tree",
    "stratified_fold_indices",
]
