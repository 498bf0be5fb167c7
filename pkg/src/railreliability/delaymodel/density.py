"""Two-component lognormal mixture density with linear predictors.

Each component's log-mean is a linear function of the features and each
log-standard-deviation is the exponential of another linear function, so
sigma stays positive for any coefficient draw:

    p(z | x) = sum_c  pi_c * LogNormal(z; mu_c(x), sigma_c(x))
    mu_c(x)  = beta_mu[c] . [1, x]
    sigma_c(x) = exp(beta_logsigma[c] . [1, x])
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class MixtureCoefficients:
    """One draw (or point value) of all regression coefficients."""

    weights: np.ndarray  # (n_components,), positive, sums to 1
    beta_mu: np.ndarray  # (n_components, 1 + n_features), intercept first
    beta_logsigma: np.ndarray  # same layout as beta_mu

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "beta_mu", np.atleast_2d(np.asarray(self.beta_mu, dtype=float)))
        object.__setattr__(
            self, "beta_logsigma", np.atleast_2d(np.asarray(self.beta_logsigma, dtype=float))
        )
        if self.beta_mu.shape != self.beta_logsigma.shape:
            raise ValueError("mu and logsigma coefficient blocks must have the same shape")
        if self.weights.shape[0] != self.beta_mu.shape[0]:
            raise ValueError("one weight per component required")
        if np.any(self.weights <= 0) or abs(float(self.weights.sum()) - 1.0) > 1e-8:
            raise ValueError("weights must be positive and sum to 1")

    @property
    def n_components(self) -> int:
        return int(self.weights.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.beta_mu.shape[1]) - 1


def design_matrix(X) -> np.ndarray:
    """Prepend the intercept column. Accepts (n, k), (k,) as a single row,
    or None/empty for an intercept-only model."""
    if X is None:
        return np.ones((1, 1))
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    n = X.shape[0] if X.size else 1
    if X.size == 0:
        return np.ones((n, 1))
    return np.hstack([np.ones((X.shape[0], 1)), X])


def component_params(design: np.ndarray, coef: MixtureCoefficients) -> tuple[np.ndarray, np.ndarray]:
    """mu and sigma per row and component, shapes (n, n_components)."""
    mu = design @ coef.beta_mu.T
    sigma = np.exp(design @ coef.beta_logsigma.T)
    return mu, sigma


def lognormal_logpdf(z: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    log_z = np.log(z)
    return -log_z - np.log(sigma) - _LOG_SQRT_2PI - 0.5 * ((log_z - mu) / sigma) ** 2


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    return (m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))).squeeze(axis)


def mixture_log_density(z, X, coef: MixtureCoefficients) -> np.ndarray:
    """Log density of shifted delays z (> 0) given features X.

    Vectorized: z of shape (n,) with X of shape (n, k) or a single feature
    row broadcast against all z.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z <= 0) or not np.isfinite(z).all():
        raise DomainError("shifted delays must be positive and finite")
    design = design_matrix(X)
    if design.shape[0] == 1 and z.shape[0] > 1:
        design = np.broadcast_to(design, (z.shape[0], design.shape[1]))
    if design.shape[0] != z.shape[0]:
        raise ValueError(f"{z.shape[0]} responses but {design.shape[0]} feature rows")
    mu, sigma = component_params(design, coef)
    comp = lognormal_logpdf(z[:, None], mu, sigma) + np.log(coef.weights)[None, :]
    return _logsumexp(comp, axis=1)
