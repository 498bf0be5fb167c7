"""Evaluation metrics: AUROC, calibration bins, journey reliability, summaries.

The quantile definition is fixed package-wide to linear interpolation
between order statistics (type 7); QQ points and the reliability buffer
time both go through :func:`quantile` so they cannot drift apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, UndefinedMetricError


def quantile(values, p: float) -> float:
    """Type-7 quantile: h = (n-1)p, linear between the bracketing order stats."""
    xs = np.sort(np.asarray(values, dtype=float))
    n = xs.size
    if n == 0:
        raise InsufficientDataError("quantile of an empty sample")
    h = (n - 1) * p
    f = int(math.floor(h))
    if f >= n - 1:
        return float(xs[-1])
    return float(xs[f] + (h - f) * (xs[f + 1] - xs[f]))


def auroc(scores, labels) -> float:
    """Rank-based AUROC; tied scores contribute 1/2 per tied pair.

    Equals the probability a random positive outranks a random negative.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs both classes", n_pos=n_pos, n_neg=n_neg)
    ranks = _midranks(scores)
    pos_rank_sum = float(np.sum(ranks[labels == 1]))
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean rank of the tied group."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=float)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


@dataclass
class CalibrationBins:
    """Reliability-diagram table: equal-width bins on predicted probability."""

    edges: np.ndarray
    mean_predicted: np.ndarray
    frequency: np.ndarray  # empirical positive rate, nan for empty bins
    count: np.ndarray

    @property
    def occupied(self) -> np.ndarray:
        return self.count > 0

    def max_deviation(self) -> float:
        """Largest |mean predicted - empirical frequency| over occupied bins."""
        mask = self.occupied
        return float(np.max(np.abs(self.mean_predicted[mask] - self.frequency[mask])))

    def to_rows(self) -> list[dict]:
        rows = []
        for i in range(len(self.count)):
            rows.append(
                {
                    "bin_low": float(self.edges[i]),
                    "bin_high": float(self.edges[i + 1]),
                    "mean_predicted": float(self.mean_predicted[i]) if self.count[i] else "",
                    "frequency": float(self.frequency[i]) if self.count[i] else "",
                    "count": int(self.count[i]),
                }
            )
        return rows


def calibration_bins(scores, labels, bins: int = 10) -> CalibrationBins:
    if bins < 2:
        raise ValueError("need at least 2 bins")
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    edges = np.linspace(0.0, 1.0, bins + 1)
    idx = np.clip((scores * bins).astype(int), 0, bins - 1)
    count = np.bincount(idx, minlength=bins)
    mean_pred = np.full(bins, np.nan)
    freq = np.full(bins, np.nan)
    occupied = count > 0
    sums = np.bincount(idx, weights=scores, minlength=bins)
    hits = np.bincount(idx, weights=labels, minlength=bins)
    mean_pred[occupied] = sums[occupied] / count[occupied]
    freq[occupied] = hits[occupied] / count[occupied]
    return CalibrationBins(edges=edges, mean_predicted=mean_pred, frequency=freq, count=count)


def reliability_rating(sample_set) -> float:
    """Fraction of sampled journeys that used exactly the planned trains.

    Abandoned (NA) samples count as not reaching the planned path. Final
    delays are irrelevant here; only path signatures matter.
    """
    outcomes = sample_set.outcomes
    if not outcomes:
        raise InsufficientDataError("no samples")
    planned = sample_set.planned_path
    on_plan = sum(1 for o in outcomes if o.delay is not None and o.path == planned)
    return on_plan / len(outcomes)


def reliability_buffer_time(delays, upper_pct: float = 95.0) -> float:
    """upper-percentile minus median of completed-journey delays, minutes.

    ``delays`` may contain None (abandoned journeys); those are excluded
    because the metric is defined over completed journeys only.
    """
    completed = np.asarray([d for d in delays if d is not None], dtype=float)
    if completed.size < 20:
        raise InsufficientDataError(
            "reliability buffer time needs at least 20 completed samples", n=int(completed.size)
        )
    return quantile(completed, upper_pct / 100.0) - quantile(completed, 0.5)


@dataclass
class SummaryStats:
    """Table-style summary of a delay sample. Kurtosis is the raw fourth
    standardized moment (normal = 3), not excess."""

    minimum: float
    median: float
    mean: float
    maximum: float
    variance: float
    skewness: float | None
    kurtosis: float | None
    n: int = 0

    def to_json_dict(self) -> dict:
        return {
            "min": self.minimum,
            "median": self.median,
            "mean": self.mean,
            "max": self.maximum,
            "variance": self.variance,
            "skewness": self.skewness,
            "kurtosis": self.kurtosis,
            "n": self.n,
        }


def summary_stats(delays) -> SummaryStats:
    xs = np.asarray(delays, dtype=float)
    if xs.size < 2:
        raise InsufficientDataError("summary needs at least 2 values", n=int(xs.size))
    mean = float(np.mean(xs))
    centered = xs - mean
    m2 = float(np.mean(centered**2))
    if m2 == 0.0:
        skew = kurt = None
    else:
        skew = float(np.mean(centered**3) / m2**1.5)
        kurt = float(np.mean(centered**4) / m2**2)
    return SummaryStats(
        minimum=float(np.min(xs)),
        median=quantile(xs, 0.5),
        mean=mean,
        maximum=float(np.max(xs)),
        variance=float(np.var(xs, ddof=1)),
        skewness=skew,
        kurtosis=kurt,
        n=int(xs.size),
    )


def qq_points(sample_a, sample_b, k: int = 99) -> list[tuple[float, float]]:
    """k quantile pairs at probabilities (i - 0.5) / k, i = 1..k."""
    if k < 2:
        raise ValueError("need at least 2 quantile levels")
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise InsufficientDataError("QQ needs non-empty samples")
    probs = [(i - 0.5) / k for i in range(1, k + 1)]
    return [(quantile(a, p), quantile(b, p)) for p in probs]
