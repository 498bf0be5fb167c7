"""MCMC convergence diagnostics: split R-hat and effective sample size.

Both operate on a (chains, draws) array of one scalar parameter. R-hat is
the standard split-chain potential scale reduction; ESS combines the
chains' autocorrelations (FFT) with Geyer's initial monotone sequence
truncation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ParamDiagnostics:
    rhat: float
    ess: float
    degenerate: bool = False


def _as_chains(chains) -> np.ndarray:
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected a (chains, draws) array")
    return x


def _split(x: np.ndarray) -> np.ndarray:
    c, s = x.shape
    half = s // 2
    return np.vstack([x[:, :half], x[:, half : 2 * half]])


def chain_variance_degenerate(chains) -> bool:
    x = _as_chains(chains)
    return bool(np.all(np.var(x, axis=1) == 0.0))


def split_rhat(chains) -> float:
    """Split-chain R-hat; defined as 1.0 for zero within-chain variance."""
    x = _as_chains(chains)
    if x.shape[0] < 2 or x.shape[1] < 4:
        raise ValueError("R-hat needs at least 2 chains of 4 draws")
    x = _split(x)
    s = x.shape[1]
    within = float(np.mean(np.var(x, axis=1, ddof=1)))
    if within == 0.0:
        return 1.0
    between = s * float(np.var(np.mean(x, axis=1), ddof=1))
    var_plus = (s - 1) / s * within + between / s
    return float(np.sqrt(var_plus / within))


def _autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased (1/n) autocovariance of one chain via FFT."""
    n = x.size
    centered = x - x.mean()
    size = 1
    while size < 2 * n:
        size *= 2
    f = np.fft.rfft(centered, size)
    acov = np.fft.irfft(f * np.conjugate(f), size)[:n].real
    return acov / n


def ess(chains) -> float:
    """Combined-chain effective sample size (split chains, Geyer truncation)."""
    x = _as_chains(chains)
    if x.shape[1] < 4:
        raise ValueError("ESS needs at least 4 draws")
    x = _split(x)
    m, s = x.shape
    acov = np.vstack([_autocovariance(row) for row in x])
    mean_var = float(np.mean(acov[:, 0])) * s / (s - 1)
    var_plus = mean_var * (s - 1) / s
    if m > 1:
        var_plus += float(np.var(np.mean(x, axis=1), ddof=1))
    if var_plus == 0.0:
        return float(m * s)

    rho = 1.0 - (mean_var - np.mean(acov, axis=0)) / var_plus
    rho[0] = 1.0

    # Geyer initial positive + monotone sequence over consecutive pairs.
    tau = 0.0
    prev_pair = np.inf
    t = 0
    max_pairs = (s - 1) // 2
    for k in range(max_pairs):
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0.0:
            break
        pair = min(pair, prev_pair)
        tau += pair
        prev_pair = pair
        t += 1
    if t == 0:
        tau = max(rho[0], 1e-12)
        return float(m * s / max(2 * tau - 1.0, 1e-12))
    tau_total = max(2.0 * tau - 1.0, 1e-12)
    return float(m * s / tau_total)
