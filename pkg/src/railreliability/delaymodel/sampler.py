"""Adaptive random-walk Metropolis-within-Gibbs for the mixture regression.

Three parameter blocks are updated in turn: all mu coefficients, all
log-sigma coefficients, and the mixing weight through its logit. During
warmup each block adapts a proposal covariance (from its own history) and a
scalar step size targeting the configured acceptance rate; everything is
frozen before the kept draws, so the retained chain is a valid Metropolis
sampler. Priors: N(0, 1) on every regression coefficient, flat Dirichlet
on the mixing weights (a log pi1 + log pi2 Jacobian term in logit space).
Label switching is ruled out by requiring the component-1 log-sigma
intercept to stay above component 2's, making component 1 the
high-variance component.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import design_matrix
from .diagnostics import ParamDiagnostics, chain_variance_degenerate, ess, split_rhat
from .features import DELAY_FEATURE_NAMES
from .posterior import MixturePosterior
from ..validation import as_delay_vector, as_feature_matrix

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_CLAMP_MINUTES = 0.01


@dataclass(frozen=True)
class McmcConfig:
    n_chains: int = 4
    n_warmup: int = 1000
    n_samples: int = 1000  # kept draws per chain
    thin: int = 3  # kernel sweeps between kept draws
    rhat_threshold: float = 1.01
    ess_threshold: float = 400.0
    target_accept: float = 0.25
    adapt_interval: int = 50


def _softplus(x: float) -> float:
    return float(np.logaddexp(0.0, x))


class _Model:
    """Packed-parameter view of the mixture regression posterior."""

    def __init__(self, X, z, n_components: int):
        self.design = design_matrix(X) if X is not None and np.size(X) else np.ones((z.size, 1))
        if self.design.shape[0] != z.size:
            raise ValueError(f"{z.size} responses but {self.design.shape[0]} feature rows")
        self.log_z = np.log(z)
        self.n = z.size
        self.n_components = n_components
        self.p = self.design.shape[1]  # 1 + n_features
        c, p = n_components, self.p
        self.mu_slice = slice(0, c * p)
        self.ls_slice = slice(c * p, 2 * c * p)
        self.dim = 2 * c * p + (1 if c == 2 else 0)
        self.ls1_int = c * p
        self.ls2_int = c * p + p

    def blocks(self) -> list[np.ndarray]:
        """Gibbs blocks (mu, logsigma, weight) plus one joint block over all
        parameters; the joint moves pick up the strong weight-vs-sigma
        correlations the marginal blocks cannot follow."""
        out = [
            np.arange(self.mu_slice.start, self.mu_slice.stop),
            np.arange(self.ls_slice.start, self.ls_slice.stop),
        ]
        if self.n_components == 2:
            out.append(np.array([self.dim - 1]))
        out.append(np.arange(self.dim))
        return out

    def proposal_widths(self) -> np.ndarray:
        """Per-coordinate posterior-width guesses from a curvature heuristic:
        prior precision 1 plus n * E[x_j^2] observations' worth of likelihood.
        Coordinates without data support (all-zero columns) get width ~1 so
        proposals can traverse their N(0,1) posterior."""
        x2 = np.mean(self.design**2, axis=0)
        w_mu = 1.0 / np.sqrt(1.0 + self.n * x2)
        w_ls = 1.0 / np.sqrt(1.0 + 2.0 * self.n * x2)
        parts = [np.tile(w_mu, self.n_components), np.tile(w_ls, self.n_components)]
        if self.n_components == 2:
            parts.append(np.array([1.0 / np.sqrt(1.0 + 0.25 * self.n)]))
        return np.concatenate(parts)

    def unpack(self, theta: np.ndarray):
        c, p = self.n_components, self.p
        beta_mu = theta[self.mu_slice].reshape(c, p)
        beta_ls = theta[self.ls_slice].reshape(c, p)
        if c == 2:
            pi1 = 1.0 / (1.0 + np.exp(-theta[-1]))
            weights = np.array([pi1, 1.0 - pi1])
        else:
            weights = np.array([1.0])
        return weights, beta_mu, beta_ls

    def log_posterior(self, theta: np.ndarray) -> float:
        if self.n_components == 2 and theta[self.ls1_int] <= theta[self.ls2_int]:
            return -np.inf
        weights, beta_mu, beta_ls = self.unpack(theta)
        mu = self.design @ beta_mu.T
        sigma = np.maximum(np.exp(self.design @ beta_ls.T), 1e-300)
        comp = (
            -self.log_z[:, None]
            - np.log(sigma)
            - _LOG_SQRT_2PI
            - 0.5 * ((self.log_z[:, None] - mu) / sigma) ** 2
            + np.log(weights)[None, :]
        )
        m = np.max(comp, axis=1)
        ll = float(np.sum(m + np.log(np.sum(np.exp(comp - m[:, None]), axis=1))))
        betas = theta[: self.ls_slice.stop]
        lp = ll - 0.5 * float(betas @ betas)
        if self.n_components == 2:
            w = float(theta[-1])
            lp += -_softplus(-w) - _softplus(w)  # log pi1 + log pi2
        if not np.isfinite(lp):
            return -np.inf
        return lp

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        m = float(np.mean(self.log_z))
        s = max(float(np.std(self.log_z)), 1e-3)
        theta = np.zeros(self.dim)
        c, p = self.n_components, self.p
        mu = np.zeros((c, p))
        ls = np.zeros((c, p))
        if c == 2:
            mu[0, 0] = m + 0.2 + 0.3 * rng.normal()
            mu[1, 0] = m - 0.1 + 0.3 * rng.normal()
            ls[0, 0] = np.log(s) + 0.4 + 0.2 * abs(rng.normal())
            ls[1, 0] = np.log(s) - 0.6 - 0.2 * abs(rng.normal())
            theta[-1] = 0.8 * rng.normal()
        else:
            mu[0, 0] = m + 0.3 * rng.normal()
            ls[0, 0] = np.log(s) + 0.3 * rng.normal()
        if p > 1:
            mu[:, 1:] = 0.05 * rng.normal(size=(c, p - 1))
            ls[:, 1:] = 0.05 * rng.normal(size=(c, p - 1))
        theta[self.mu_slice] = mu.ravel()
        theta[self.ls_slice] = ls.ravel()
        return theta


def _run_chain(model: _Model, config: McmcConfig, seed: np.random.SeedSequence):
    rng = np.random.default_rng(seed)
    theta = model.initial_state(rng)
    lp = model.log_posterior(theta)
    if not np.isfinite(lp):  # pathological start; recenter slopes at zero
        theta[model.mu_slice.stop :] *= 0.0
        lp = model.log_posterior(theta)

    blocks = model.blocks()
    width = model.proposal_widths()
    chol = [np.diag(width[b]) * (2.38 / np.sqrt(b.size)) for b in blocks]
    log_scale = [0.0 for _ in blocks]
    # optimal RW acceptance falls with block dimension (0.44 scalar -> 0.234)
    targets = [0.44 if b.size == 1 else (0.35 if b.size <= 4 else config.target_accept) for b in blocks]
    accept_window = [0 for _ in blocks]
    accept_total = [0 for _ in blocks]
    history = np.empty((config.n_warmup, model.dim))
    draws = np.empty((config.n_samples, model.dim))
    adapt_round = 0

    def step(adapting: bool):
        nonlocal theta, lp
        for b, idx in enumerate(blocks):
            proposal = theta.copy()
            jump = chol[b] @ rng.standard_normal(idx.size)
            proposal[idx] = theta[idx] + np.exp(log_scale[b]) * jump
            lp_new = model.log_posterior(proposal)
            if np.log(rng.random()) < lp_new - lp:
                theta, lp = proposal, lp_new
                accept_window[b] += 1
                if not adapting:
                    accept_total[b] += 1

    for t in range(config.n_warmup):
        step(adapting=True)
        history[t] = theta
        if (t + 1) % config.adapt_interval == 0:
            adapt_round += 1
            gain = max(0.2, 1.0 / np.sqrt(adapt_round))
            for b in range(len(blocks)):
                rate = accept_window[b] / config.adapt_interval
                log_scale[b] += gain * (rate - targets[b]) * 2.0
                accept_window[b] = 0
            if t + 1 >= 4 * config.adapt_interval:
                half = history[(t + 1) // 2 : t + 1]
                for b, idx in enumerate(blocks):
                    # width-scaled diagonal floor keeps weakly-identified
                    # coordinates explorable even if early history collapsed
                    cov = np.atleast_2d(np.cov(half[:, idx].T)) + np.diag((0.05 * width[idx]) ** 2)
                    try:
                        chol[b] = np.linalg.cholesky(cov) * (2.38 / np.sqrt(idx.size))
                        log_scale[b] = 0.0
                    except np.linalg.LinAlgError:
                        pass

    for b in range(len(blocks)):
        accept_window[b] = 0
    for t in range(config.n_samples):
        for _ in range(max(1, config.thin)):
            step(adapting=False)
        draws[t] = theta

    n_steps = config.n_samples * max(1, config.thin)
    rates = [accept_total[b] / max(n_steps, 1) for b in range(len(blocks))]
    return draws, rates


def _param_names(n_components: int, feature_names) -> list[str]:
    covs = ("intercept",) + tuple(feature_names)
    names = []
    suffixes = ("1", "2") if n_components == 2 else ("",)
    for s in suffixes:
        names += [f"mu{s}_{c}" for c in covs]
    for s in suffixes:
        names += [f"logsigma{s}_{c}" for c in covs]
    if n_components == 2:
        names.append("weight_logit")
    return names


def fit_mcmc(
    X,
    delays,
    *,
    n_components: int = 2,
    shift: float = 6.0,
    feature_names=None,
    config: McmcConfig | None = None,
    random_state: int = 0,
) -> MixturePosterior:
    """Sample the posterior of the mixture regression on shifted delays.

    Shifted responses z = delay + shift that are non-positive are clamped
    to 0.01 minutes and counted on the returned posterior.
    """
    config = config or McmcConfig()
    if n_components not in (1, 2):
        raise ValueError("n_components must be 1 or 2")
    if X is None or np.size(X) == 0:
        X_mat = None
        feature_names = tuple(feature_names or ())
    else:
        X_mat = as_feature_matrix(X, allow_nan=False)
        if feature_names is None:
            feature_names = (
                DELAY_FEATURE_NAMES
                if X_mat.shape[1] == len(DELAY_FEATURE_NAMES)
                else tuple(f"x{i}" for i in range(X_mat.shape[1]))
            )
        feature_names = tuple(feature_names)
    n_rows = X_mat.shape[0] if X_mat is not None else np.size(delays)
    delays = as_delay_vector(delays, n_rows)

    z = delays + shift
    n_clamped = int(np.sum(z <= 0))
    z = np.where(z <= 0, _CLAMP_MINUTES, z)

    model = _Model(X_mat, z, n_components)
    seeds = np.random.SeedSequence(random_state).spawn(config.n_chains)
    chains = np.empty((config.n_chains, config.n_samples, model.dim))
    rates = []
    for c in range(config.n_chains):
        chains[c], chain_rates = _run_chain(model, config, seeds[c])
        rates.append(chain_rates)

    names = _param_names(n_components, feature_names)
    diagnostics: dict[str, ParamDiagnostics] = {}

    def diag_for(series: np.ndarray) -> ParamDiagnostics:
        degenerate = chain_variance_degenerate(series)
        if degenerate:
            return ParamDiagnostics(rhat=1.0, ess=float(series.size), degenerate=True)
        return ParamDiagnostics(rhat=split_rhat(series), ess=ess(series), degenerate=False)

    for i, name in enumerate(names):
        diagnostics[name] = diag_for(chains[:, :, i])
    if n_components == 2:
        pi1 = 1.0 / (1.0 + np.exp(-chains[:, :, -1]))
        diagnostics["pi1"] = diag_for(pi1)
        diagnostics["pi2"] = diagnostics["pi1"]  # pi2 = 1 - pi1 exactly

    accepted = all(
        d.degenerate or (d.rhat < config.rhat_threshold and d.ess > config.ess_threshold)
        for d in diagnostics.values()
    )
    block_names = ["beta_mu", "beta_logsigma"] + (["weight"] if n_components == 2 else []) + ["joint"]
    mean_rates = {
        name: float(np.mean([chain[i] for chain in rates])) for i, name in enumerate(block_names)
    }

    return MixturePosterior(
        n_components=n_components,
        feature_names=feature_names,
        shift=shift,
        param_names=tuple(names),
        draws=chains,
        diagnostics=diagnostics,
        accepted=accepted,
        n_clamped=n_clamped,
        block_acceptance=mean_rates,
    )
