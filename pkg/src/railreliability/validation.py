"""Input-validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateLabelsError, SchemaError


def as_feature_matrix(X, n_features: int | None = None, allow_nan: bool = True) -> np.ndarray:
    """2-D float64 matrix; NaN allowed (missing values) unless told otherwise."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise SchemaError(f"expected a 2-D feature matrix, got ndim={X.ndim}")
    if n_features is not None and X.shape[1] != n_features:
        raise SchemaError(
            f"feature matrix has {X.shape[1]} columns, expected {n_features}",
            got=int(X.shape[1]),
            expected=int(n_features),
        )
    if np.isinf(X).any():
        raise SchemaError("feature matrix contains infinities")
    if not allow_nan and np.isnan(X).any():
        raise SchemaError("feature matrix contains NaN")
    return X


def as_binary_labels(y, n_rows: int) -> np.ndarray:
    """Labels as float 0/1; both classes must be present."""
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != n_rows:
        raise SchemaError(f"got {y.size} labels for {n_rows} rows")
    values = np.unique(y)
    if not np.isin(values, (0.0, 1.0)).all():
        raise SchemaError(f"labels must be 0/1, got values {values.tolist()}")
    if values.size < 2:
        raise DegenerateLabelsError("training data contains a single class")
    return y


def as_delay_vector(y, n_rows: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != n_rows:
        raise SchemaError(f"got {y.size} responses for {n_rows} rows")
    if not np.isfinite(y).all():
        raise SchemaError("responses must be finite")
    return y
