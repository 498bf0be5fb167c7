"""Estimator facade around the MCMC fit and posterior predictive."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .posterior import elpd, posterior_predictive_sample
from .sampler import McmcConfig, fit_mcmc
from ..errors import SchemaError


class DelayMixtureRegressor(BaseEstimator):
    """Bayesian lognormal-mixture regression of arrival delays.

    fit(X, y) runs the MCMC on y + shift; afterwards ``posterior_`` holds
    the draws and diagnostics and ``accepted_`` says whether every R-hat and
    ESS cleared its threshold. ``sample`` draws posterior-predictive delays
    for one feature row. Setting ``n_components=1`` gives the plain
    lognormal regression baseline.
    """

    def __init__(
        self,
        n_components: int = 2,
        shift: float = 6.0,
        n_chains: int = 4,
        n_warmup: int = 1000,
        n_samples: int = 1000,
        thin: int = 3,
        rhat_threshold: float = 1.01,
        ess_threshold: float = 400.0,
        target_accept: float = 0.25,
        adapt_interval: int = 50,
        feature_names=None,
        random_state: int = 0,
    ):
        self.n_components = n_components
        self.shift = shift
        self.n_chains = n_chains
        self.n_warmup = n_warmup
        self.n_samples = n_samples
        self.thin = thin
        self.rhat_threshold = rhat_threshold
        self.ess_threshold = ess_threshold
        self.target_accept = target_accept
        self.adapt_interval = adapt_interval
        self.feature_names = feature_names
        self.random_state = random_state

    def _config(self) -> McmcConfig:
        return McmcConfig(
            n_chains=self.n_chains,
            n_warmup=self.n_warmup,
            n_samples=self.n_samples,
            thin=self.thin,
            rhat_threshold=self.rhat_threshold,
            ess_threshold=self.ess_threshold,
            target_accept=self.target_accept,
            adapt_interval=self.adapt_interval,
        )

    def fit(self, X, y):
        self.posterior_ = fit_mcmc(
            X,
            y,
            n_components=self.n_components,
            shift=self.shift,
            feature_names=self.feature_names,
            config=self._config(),
            random_state=self.random_state,
        )
        self.accepted_ = self.posterior_.accepted
        self.n_features_in_ = len(self.posterior_.feature_names)
        return self

    def _check_fitted(self):
        if not hasattr(self, "posterior_"):
            raise SchemaError("model is not fitted")

    def sample(self, x, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
        """n posterior-predictive delay draws (minutes) for feature row x."""
        self._check_fitted()
        rng = rng if rng is not None else np.random.default_rng(self.random_state)
        return posterior_predictive_sample(self.posterior_, x, n, rng)

    def elpd(self, X, y) -> float:
        self._check_fitted()
        return elpd(self.posterior_, X, y)
