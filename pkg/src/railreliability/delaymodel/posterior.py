"""Posterior container: predictive sampling, ELPD, persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .density import MixtureCoefficients, design_matrix, lognormal_logpdf
from .diagnostics import ParamDiagnostics
from ..errors import SchemaError

POSTERIOR_FORMAT = "railreliability.mixture_posterior"
POSTERIOR_VERSION = 1
_CLAMP_MINUTES = 0.01


@dataclass
class MixturePosterior:
    """MCMC draws of all mixture-regression parameters plus diagnostics.

    ``draws`` is (chains, kept draws, dim) in the packed parameter order
    given by ``param_names``; the mixing weight is stored on its logit
    scale as the last coordinate (two-component models only).
    """

    n_components: int
    feature_names: tuple
    shift: float
    param_names: tuple
    draws: np.ndarray
    diagnostics: dict
    accepted: bool
    n_clamped: int = 0
    block_acceptance: dict = field(default_factory=dict)

    @property
    def n_chains(self) -> int:
        return int(self.draws.shape[0])

    @property
    def n_draws(self) -> int:
        """Total kept draws across chains."""
        return int(self.draws.shape[0] * self.draws.shape[1])

    def stacked(self) -> np.ndarray:
        return self.draws.reshape(-1, self.draws.shape[2])

    def _coef_arrays(self):
        """Per-draw (weights, beta_mu, beta_logsigma) as stacked arrays.
        Cached: draws are immutable once the posterior exists."""
        cache = getattr(self, "_coef_cache", None)
        if cache is not None:
            return cache
        flat = self.stacked()
        c = self.n_components
        p = len(self.feature_names) + 1
        beta_mu = flat[:, : c * p].reshape(-1, c, p)
        beta_ls = flat[:, c * p : 2 * c * p].reshape(-1, c, p)
        if c == 2:
            pi1 = 1.0 / (1.0 + np.exp(-flat[:, -1]))
            weights = np.stack([pi1, 1.0 - pi1], axis=1)
        else:
            weights = np.ones((flat.shape[0], 1))
        self._coef_cache = (weights, beta_mu, beta_ls)
        return self._coef_cache

    def coefficients_at(self, index: int) -> MixtureCoefficients:
        weights, beta_mu, beta_ls = self._coef_arrays()
        return MixtureCoefficients(
            weights=weights[index], beta_mu=beta_mu[index], beta_logsigma=beta_ls[index]
        )

    def param_draws(self, name: str) -> np.ndarray:
        """(chains, draws) series for a named parameter; 'pi1'/'pi2' derived."""
        if name in ("pi1", "pi2"):
            if self.n_components != 2:
                raise KeyError(name)
            pi1 = 1.0 / (1.0 + np.exp(-self.draws[:, :, -1]))
            return pi1 if name == "pi1" else 1.0 - pi1
        try:
            i = self.param_names.index(name)
        except ValueError as exc:
            raise KeyError(name) from exc
        return self.draws[:, :, i]

    def credible_interval(self, name: str, level: float = 0.95) -> tuple[float, float]:
        series = self.param_draws(name).ravel()
        alpha = (1.0 - level) / 2.0
        return (float(np.quantile(series, alpha)), float(np.quantile(series, 1.0 - alpha)))

    def summary_rows(self) -> list[dict]:
        names = list(self.param_names)
        if self.n_components == 2:
            names = ["pi1", "pi2"] + [n for n in names if n != "weight_logit"]
        rows = []
        for name in names:
            series = self.param_draws(name).ravel()
            low, high = self.credible_interval(name)
            diag = self.diagnostics.get(name)
            rows.append(
                {
                    "parameter": name,
                    "mean": float(np.mean(series)),
                    "q2.5": low,
                    "q97.5": high,
                    "rhat": diag.rhat if diag else "",
                    "ess": diag.ess if diag else "",
                }
            )
        return rows

    def to_json_dict(self) -> dict:
        return {
            "format": POSTERIOR_FORMAT,
            "version": POSTERIOR_VERSION,
            "n_components": self.n_components,
            "feature_names": list(self.feature_names),
            "shift": self.shift,
            "param_names": list(self.param_names),
            "draw_shape": list(self.draws.shape),
            "draws": self.draws.ravel().tolist(),
            "diagnostics": {
                name: {"rhat": d.rhat, "ess": d.ess, "degenerate": d.degenerate}
                for name, d in self.diagnostics.items()
            },
            "accepted": self.accepted,
            "n_clamped": self.n_clamped,
            "block_acceptance": dict(self.block_acceptance),
        }

    def save(self, path: str | Path, config_hash: str | None = None):
        doc = self.to_json_dict()
        if config_hash:
            doc["config_hash"] = config_hash
        Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")

    @classmethod
    def from_json_dict(cls, doc: dict) -> "MixturePosterior":
        if doc.get("format") != POSTERIOR_FORMAT:
            raise SchemaError(f"not a posterior document: {doc.get('format')!r}")
        if doc.get("version") != POSTERIOR_VERSION:
            raise SchemaError(f"unsupported posterior version {doc.get('version')!r}")
        shape = tuple(doc["draw_shape"])
        return cls(
            n_components=int(doc["n_components"]),
            feature_names=tuple(doc["feature_names"]),
            shift=float(doc["shift"]),
            param_names=tuple(doc["param_names"]),
            draws=np.asarray(doc["draws"], dtype=float).reshape(shape),
            diagnostics={
                name: ParamDiagnostics(rhat=d["rhat"], ess=d["ess"], degenerate=d["degenerate"])
                for name, d in doc["diagnostics"].items()
            },
            accepted=bool(doc["accepted"]),
            n_clamped=int(doc["n_clamped"]),
            block_acceptance=dict(doc.get("block_acceptance", {})),
        )

    @classmethod
    def load(cls, path: str | Path) -> "MixturePosterior":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def posterior_predictive_sample(
    posterior: MixturePosterior, x, n: int, rng: np.random.Generator
) -> np.ndarray:
    """n delays (minutes) for feature row x: draw a posterior draw, a
    component, then a lognormal variate, and undo the shift. Outputs are
    bounded below by -shift."""
    xd = design_matrix(np.asarray(x, dtype=float)) if x is not None else design_matrix(None)
    if xd.shape[0] != 1:
        raise ValueError("one feature row at a time")
    weights, beta_mu, beta_ls = posterior._coef_arrays()
    mu_all = (beta_mu @ xd[0])  # (n_draws, components)
    sigma_all = np.exp(beta_ls @ xd[0])
    idx = rng.integers(0, mu_all.shape[0], size=n)
    if posterior.n_components == 2:
        comp = (rng.random(n) >= weights[idx, 0]).astype(int)
    else:
        comp = np.zeros(n, dtype=int)
    z = rng.lognormal(mean=mu_all[idx, comp], sigma=sigma_all[idx, comp])
    return z - posterior.shift


def elpd(posterior: MixturePosterior, X, delays) -> float:
    """Expected log pointwise predictive density of held-out delays.

    Averages the mixture density over all kept draws per point (log-sum-exp
    over draws), then sums the log means. Holdout responses are shifted and
    clamped exactly like training data.
    """
    delays = np.asarray(delays, dtype=float).ravel()
    if delays.size == 0:
        raise ValueError("empty holdout")
    z = delays + posterior.shift
    z = np.where(z <= 0, _CLAMP_MINUTES, z)

    design = design_matrix(X) if X is not None and np.size(X) else np.ones((z.size, 1))
    if design.shape[0] == 1 and z.size > 1:
        design = np.broadcast_to(design, (z.size, design.shape[1]))
    if design.shape[0] != z.size:
        raise ValueError(f"{z.size} responses but {design.shape[0]} feature rows")

    weights, beta_mu, beta_ls = posterior._coef_arrays()
    n_draws = weights.shape[0]
    total = np.full(z.size, -np.inf)
    chunk = 256
    for start in range(0, n_draws, chunk):
        end = min(start + chunk, n_draws)
        # (points, draws_in_chunk, components)
        mu = np.einsum("np,dcp->ndc", design, beta_mu[start:end])
        sigma = np.exp(np.einsum("np,dcp->ndc", design, beta_ls[start:end]))
        comp = lognormal_logpdf(z[:, None, None], mu, sigma)
        comp = comp + np.log(weights[start:end])[None, :, :]
        m = comp.max(axis=2)
        per_draw = m + np.log(np.exp(comp - m[:, :, None]).sum(axis=2))
        chunk_max = per_draw.max(axis=1)
        chunk_log = chunk_max + np.log(np.exp(per_draw - chunk_max[:, None]).sum(axis=1))
        total = np.logaddexp(total, chunk_log)
    return float(np.sum(total - np.log(n_draws)))
