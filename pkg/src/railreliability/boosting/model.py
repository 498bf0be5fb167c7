"""Boosted-ensemble classifier with an sklearn-style estimator surface."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..errors import SchemaError
from ..validation import as_binary_labels, as_feature_matrix
from .trees import FlatTree, grow_tree

MODEL_FORMAT = "railreliability.boosted_model"
MODEL_VERSION = 1


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class TransferMissBooster(BaseEstimator, ClassifierMixin):
    """Gradient-boosted trees predicting the probability a transfer is missed.

    The positive class is "missed" (the minority): labels are 1 when the
    connection was not reached. Logistic loss with second-order split gains,
    row subsampling per round, NA-aware default directions, and optional
    per-feature monotone constraints on the predicted log-odds
    (-1: non-increasing, +1: non-decreasing). No resampling or class
    weighting is applied to the imbalanced labels; calibration is checked
    downstream instead.

    Parameters
    ----------
    n_rounds : number of trees.
    max_depth : maximum tree depth.
    learning_rate : shrinkage applied to every leaf weight.
    subsample : fraction of rows drawn (without replacement) per round.
    gamma : minimum split gain.
    reg_lambda : L2 regularization on leaf weights.
    min_child_weight : minimum hessian sum per child (blocks tiny leaves).
    monotone_constraints : dict mapping feature name to -1/0/+1, or a
        sequence aligned with the columns; None means unconstrained.
    feature_names : column names; defaults to f0..f{d-1} at fit time.
    random_state : seed for the subsampling streams.
    """

    def __init__(
        self,
        n_rounds: int = 500,
        max_depth: int = 5,
        learning_rate: float = 0.1,
        subsample: float = 0.8,
        gamma: float = 0.1,
        reg_lambda: float = 1.0,
        min_child_weight: float = 1.0,
        monotone_constraints=None,
        feature_names=None,
        random_state: int = 0,
    ):
        self.n_rounds = n_rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.subsample = subsample
        self.gamma = gamma
        self.reg_lambda = reg_lambda
        self.min_child_weight = min_child_weight
        self.monotone_constraints = monotone_constraints
        self.feature_names = feature_names
        self.random_state = random_state

    def _resolve_monotone(self, names: tuple) -> np.ndarray:
        spec = self.monotone_constraints
        d = len(names)
        if spec is None:
            return np.zeros(d, dtype=np.int8)
        if isinstance(spec, dict):
            out = np.zeros(d, dtype=np.int8)
            for key, val in spec.items():
                if key not in names:
                    raise SchemaError(f"monotone constraint on unknown feature {key!r}")
                out[names.index(key)] = int(val)
        else:
            out = np.asarray(spec, dtype=np.int8)
            if out.shape != (d,):
                raise SchemaError(f"monotone constraint vector has shape {out.shape}, expected ({d},)")
        if not np.isin(out, (-1, 0, 1)).all():
            raise SchemaError("monotone constraints must be -1, 0 or +1")
        return out

    def fit(self, X, y):
        X = as_feature_matrix(X)
        y = as_binary_labels(y, X.shape[0])
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample must be in (0, 1]")
        n, d = X.shape
        names = tuple(self.feature_names) if self.feature_names is not None else tuple(
            f"f{i}" for i in range(d)
        )
        if len(names) != d:
            raise SchemaError(f"{len(names)} feature names for {d} columns")
        monotone = self._resolve_monotone(names)

        prevalence = float(np.mean(y))
        base = float(np.log(prevalence / (1.0 - prevalence)))
        margin = np.full(n, base)
        rng = np.random.default_rng(self.random_state)
        n_sub = max(1, int(np.floor(self.subsample * n)))

        trees: list[FlatTree] = []
        gains = np.zeros(d)
        logloss: list[float] = []
        all_rows = np.arange(n, dtype=np.intp)
        for _ in range(self.n_rounds):
            p = _sigmoid(margin)
            g = p - y
            h = p * (1.0 - p)
            if n_sub < n:
                rows = np.sort(rng.choice(n, size=n_sub, replace=False)).astype(np.intp)
            else:
                rows = all_rows
            tree = grow_tree(
                X,
                g,
                h,
                rows,
                max_depth=self.max_depth,
                reg_lambda=self.reg_lambda,
                gamma=self.gamma,
                monotone=monotone,
                learning_rate=self.learning_rate,
                min_child_weight=self.min_child_weight,
                gain_accumulator=gains,
            )
            margin += tree.predict(X)
            trees.append(tree)
            p_full = _sigmoid(margin)
            eps = 1e-15
            logloss.append(
                float(-np.mean(y * np.log(p_full + eps) + (1 - y) * np.log(1 - p_full + eps)))
            )

        self.feature_names_ = names
        self.monotone_ = monotone
        self.base_score_ = base
        self.trees_ = trees
        self.train_logloss_ = logloss
        total_gain = gains.sum()
        self.feature_importances_ = gains / total_gain if total_gain > 0 else gains
        self.n_features_in_ = d
        self.classes_ = np.array([0, 1])
        return self

    def _check_fitted(self):
        if not hasattr(self, "trees_"):
            raise SchemaError("model is not fitted")

    def decision_function(self, X) -> np.ndarray:
        self._check_fitted()
        X = as_feature_matrix(X, n_features=self.n_features_in_)
        margin = np.full(X.shape[0], self.base_score_)
        for tree in self.trees_:
            margin += tree.predict(X)
        return margin

    def predict_miss_probability(self, X) -> np.ndarray:
        """P(missed) per row; NaN features route along stored defaults."""
        return _sigmoid(self.decision_function(X))

    def predict_proba(self, X) -> np.ndarray:
        p = self.predict_miss_probability(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.predict_miss_probability(X) >= 0.5).astype(int)

    def to_json_dict(self) -> dict:
        self._check_fitted()
        monotone_spec = self.monotone_constraints
        if isinstance(monotone_spec, dict):
            monotone_spec = dict(monotone_spec)
        elif monotone_spec is not None:
            monotone_spec = list(np.asarray(monotone_spec).tolist())
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "params": {
                "n_rounds": self.n_rounds,
                "max_depth": self.max_depth,
                "learning_rate": self.learning_rate,
                "subsample": self.subsample,
                "gamma": self.gamma,
                "reg_lambda": self.reg_lambda,
                "min_child_weight": self.min_child_weight,
                "monotone_constraints": monotone_spec,
                "random_state": self.random_state,
            },
            "feature_names": list(self.feature_names_),
            "monotone": self.monotone_.tolist(),
            "base_score": self.base_score_,
            "trees": [t.to_dict() for t in self.trees_],
        }

    def save(self, path: str | Path, config_hash: str | None = None):
        doc = self.to_json_dict()
        if config_hash:
            doc["config_hash"] = config_hash
        Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TransferMissBooster":
        if doc.get("format") != MODEL_FORMAT:
            raise SchemaError(f"not a boosted-model document: {doc.get('format')!r}")
        if doc.get("version") != MODEL_VERSION:
            raise SchemaError(f"unsupported model version {doc.get('version')!r}")
        params = dict(doc["params"])
        model = cls(feature_names=tuple(doc["feature_names"]), **params)
        model.feature_names_ = tuple(doc["feature_names"])
        model.monotone_ = np.asarray(doc["monotone"], dtype=np.int8)
        model.base_score_ = float(doc["base_score"])
        model.trees_ = [FlatTree.from_dict(t) for t in doc["trees"]]
        model.train_logloss_ = []
        model.feature_importances_ = np.zeros(len(model.feature_names_))
        model.n_features_in_ = len(model.feature_names_)
        model.classes_ = np.array([0, 1])
        return model

    @classmethod
    def load(cls, path: str | Path) -> "TransferMissBooster":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))
