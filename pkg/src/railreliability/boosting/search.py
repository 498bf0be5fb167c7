"""Cross-validated grid search for the booster."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..metrics import auroc
from .model import TransferMissBooster


def stratified_fold_indices(y, k: int, random_state: int = 0) -> np.ndarray:
    """Fold id per row, classes dealt round-robin after a seeded shuffle."""
    if k < 2:
        raise ValueError("need k >= 2 folds")
    y = np.asarray(y)
    rng = np.random.default_rng(random_state)
    folds = np.empty(y.size, dtype=np.int32)
    for cls in (0, 1):
        idx = np.nonzero(y == cls)[0]
        rng.shuffle(idx)
        folds[idx] = np.arange(idx.size) % k
    return folds


@dataclass
class GridSearchResult:
    best_params: dict
    scores: list  # (params, mean out-of-fold AUROC) per grid entry

    @property
    def best_score(self) -> float:
        for params, score in self.scores:
            if params == self.best_params:
                return score
        raise KeyError("best params missing from scores")


def grid_search_cv(
    X,
    y,
    grid,
    k: int = 5,
    base_params: dict | None = None,
    random_state: int = 0,
) -> GridSearchResult:
    """Pick the grid entry maximizing mean out-of-fold AUROC.

    Exact score ties go to the smaller (n_rounds, max_depth) pair,
    lexicographically; folds and per-fold fits are seeded, so the result is
    reproducible.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty grid")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    folds = stratified_fold_indices(y, k, random_state)

    scores = []
    for entry in grid:
        params = dict(base_params or {})
        params.update(entry)
        fold_scores = []
        for fold in range(k):
            test = folds == fold
            model = TransferMissBooster(**params, random_state=random_state + fold)
            model.fit(X[~test], y[~test])
            fold_scores.append(auroc(model.predict_miss_probability(X[test]), y[test]))
        scores.append((dict(entry), float(np.mean(fold_scores))))

    def sort_key(item):
        params, score = item
        merged = dict(base_params or {})
        merged.update(params)
        n_rounds = merged.get("n_rounds", TransferMissBooster().n_rounds)
        max_depth = merged.get("max_depth", TransferMissBooster().max_depth)
        return (-score, n_rounds, max_depth)

    best_params = min(scores, key=sort_key)[0]
    return GridSearchResult(best_params=best_params, scores=scores)
