"""Bayesian lognormal-mixture regression of arrival delays."""

from .density import MixtureCoefficients, design_matrix, mixture_log_density
from .diagnostics import ParamDiagnostics, ess, split_rhat
from .features import DELAY_FEATURE_NAMES, DelayFeatures, delay_features_from_event, delay_training_matrix
from .posterior import MixturePosterior, elpd, posterior_predictive_sample
from .regressor import DelayMixtureRegressor
from .sampler import McmcConfig, fit_mcmc
from ..metrics import qq_points

__all__ = [
    "DELAY_FEATURE_NAMES",
    "DelayFeatures",
    "DelayMixtureRegressor",
    "McmcConfig",
    "MixtureCoefficients",
    "MixturePosterior",
    "ParamDiagnostics",
    "delay_features_from_event",
    "delay_training_matrix",
    "design_matrix",
    "elpd",
    "ess",
    "fit_mcmc",
    "mixture_log_density",
    "posterior_predictive_sample",
    "qq_points",
    "split_rhat",
]
