"""Independent oracle implementations used by the tests.

Deliberately written with different algorithms (pure Python where feasible)
than the library paths they check, so agreement is evidence and not
tautology.
"""

import math


def brute_force_auroc(scores, labels):
    """O(n^2) over all positive-negative pairs, ties worth 1/2."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def type7_quantile(values, p):
    """h = (n-1)p with linear interpolation between order statistics."""
    xs = sorted(float(v) for v in values)
    n = len(xs)
    h = (n - 1) * p
    f = math.floor(h)
    if f >= n - 1:
        return xs[-1]
    return xs[f] + (h - f) * (xs[f + 1] - xs[f])


def ks_distance(sample_a, sample_b):
    """Two-sample Kolmogorov-Smirnov statistic (exact sup over both samples)."""
    a = sorted(sample_a)
    b = sorted(sample_b)
    na, nb = len(a), len(b)
    i = j = 0
    d = 0.0
    while i < na and j < nb:
        if a[i] <= b[j]:
            i += 1
        else:
            j += 1
        d = max(d, abs(i / na - j / nb))
    return d


def lognormal_mean(mu, sigma):
    return math.exp(mu + sigma * sigma / 2.0)


def mixture_mean(weights, mus, sigmas):
    return sum(w * lognormal_mean(m, s) for w, m, s in zip(weights, mus, sigmas))


def mixture_pdf(z, weights, mus, sigmas):
    total = 0.0
    for w, m, s in zip(weights, mus, sigmas):
        total += w * math.exp(-((math.log(z) - m) ** 2) / (2 * s * s)) / (z * s * math.sqrt(2 * math.pi))
    return total


def binomial_bounds(n, p, z=4.0):
    """Interval that contains the empirical rate with ~1-1e-4 probability."""
    half = z * math.sqrt(p * (1 - p) / n)
    return max(0.0, p - half), min(1.0, p + half)
