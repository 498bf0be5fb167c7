import numpy as np
import pytest

from _oracles import brute_force_auroc, type7_quantile
from railreliability.errors import InsufficientDataError, UndefinedMetricError
from railreliability.journey import DelaySampleSet, JourneyOutcome
from railreliability.metrics import (
    auroc,
    calibration_bins,
    qq_points,
    quantile,
    reliability_buffer_time,
    reliability_rating,
    summary_stats,
)


class TestAuroc:
    def test_perfect_separation(self):
        assert auroc([0.9, 0.1], [1, 0]) == 1.0

    def test_all_equal_scores_is_half(self):
        assert auroc([0.3] * 10, [1, 0] * 5) == 0.5

    def test_matches_brute_force(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            n = int(rng.integers(10, 120))
            scores = np.round(rng.random(n), 2)  # rounding forces ties
            labels = rng.integers(0, 2, size=n)
            if labels.sum() in (0, n):
                labels[0] = 1 - labels[0]
            assert auroc(scores, labels) == pytest.approx(
                brute_force_auroc(scores.tolist(), labels.tolist()), abs=1e-12
            )

    def test_single_class_undefined(self):
        with pytest.raises(UndefinedMetricError):
            auroc([0.1, 0.2], [1, 1])

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(1)
        scores = rng.random(200)
        labels = rng.integers(0, 2, size=200)
        assert auroc(scores, labels) == pytest.approx(auroc(np.exp(3 * scores), labels), abs=1e-12)

    def test_label_flip_complement(self):
        rng = np.random.default_rng(2)
        scores = rng.random(101)  # continuous, tie-free
        labels = rng.integers(0, 2, size=101)
        assert auroc(scores, labels) + auroc(scores, 1 - labels) == pytest.approx(1.0, abs=1e-12)


class TestCalibration:
    def test_perfectly_calibrated_scores(self):
        rng = np.random.default_rng(11)
        scores = rng.random(50_000)
        labels = (rng.random(50_000) < scores).astype(float)
        bins = calibration_bins(scores, labels, bins=10)
        assert bins.max_deviation() <= 0.05

    def test_single_occupied_bin(self):
        bins = calibration_bins([1.0, 1.0, 1.0], [1, 1, 1], bins=10)
        assert bins.count[-1] == 3
        assert bins.frequency[-1] == 1.0
        assert bins.count[:9].sum() == 0

    def test_empty_bins_flagged_not_nan_propagating(self):
        bins = calibration_bins([0.05, 0.05], [0, 1], bins=10)
        assert bins.occupied.sum() == 1
        assert np.isfinite(bins.max_deviation())

    def test_counts_sum_to_sample_size(self):
        rng = np.random.default_rng(3)
        scores = rng.random(777)
        bins = calibration_bins(scores, rng.integers(0, 2, 777), bins=7)
        assert bins.count.sum() == 777


def _sample_set(delays_and_paths, planned=("A", "B")):
    outcomes = [
        JourneyOutcome(delay=d, path=p, abandoned_reason=None if d is not None else "cutoff")
        for d, p in delays_and_paths
    ]
    return DelaySampleSet(planned_path=planned, outcomes=outcomes)


class TestReliabilityRating:
    def test_fraction_on_planned_path(self):
        entries = [(0.0, ("A", "B"))] * 900 + [(60.0, ("A", "C"))] * 100
        assert reliability_rating(_sample_set(entries)) == 0.9

    def test_all_na_is_zero(self):
        entries = [(None, ("A",))] * 10
        assert reliability_rating(_sample_set(entries)) == 0.0

    def test_ignores_delay_values(self):
        entries = [(999.0, ("A", "B"))] * 5
        assert reliability_rating(_sample_set(entries)) == 1.0


class TestRbt:
    def test_constant_delays_zero(self):
        assert reliability_buffer_time([5.0] * 30) == 0.0

    def test_shift_invariance(self):
        rng = np.random.default_rng(5)
        delays = rng.exponential(10.0, size=200)
        base = reliability_buffer_time(delays.tolist())
        for shift in rng.normal(0, 50, size=50):
            shifted = (delays + shift).tolist()
            assert reliability_buffer_time(shifted) == pytest.approx(base, abs=1e-9)

    def test_uniform_grid_matches_oracle(self):
        delays = [float(i) for i in range(1000)]
        expected = type7_quantile(delays, 0.95) - type7_quantile(delays, 0.5)
        assert reliability_buffer_time(delays) == expected
        assert expected == pytest.approx(449.55, abs=1e-9)

    def test_na_excluded(self):
        delays = [None] * 10 + [float(i) for i in range(100)]
        assert reliability_buffer_time(delays) == reliability_buffer_time(delays[10:])

    def test_too_few_samples(self):
        with pytest.raises(InsufficientDataError):
            reliability_buffer_time([1.0] * 19)

    def test_monotone_in_upper_percentile(self):
        rng = np.random.default_rng(8)
        delays = rng.gamma(2.0, 5.0, size=500).tolist()
        values = [reliability_buffer_time(delays, upper_pct=p) for p in (80, 90, 95, 99)]
        assert values == sorted(values)


class TestQuantile:
    def test_matches_oracle_on_random_samples(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            xs = rng.normal(size=int(rng.integers(2, 400))).tolist()
            p = float(rng.random())
            assert quantile(xs, p) == type7_quantile(xs, p)


class TestSummaryStats:
    def test_standard_normal_moments(self):
        rng = np.random.default_rng(13)
        xs = rng.standard_normal(1_000_000)
        stats = summary_stats(xs)
        assert abs(stats.skewness) < 0.02
        assert abs(stats.kurtosis - 3.0) < 0.1

    def test_constant_sample(self):
        stats = summary_stats([4.0, 4.0, 4.0])
        assert stats.variance == 0.0
        assert stats.skewness is None

    def test_matches_moment_oracle(self):
        rng = np.random.default_rng(17)
        xs = np.concatenate([rng.normal(0, 1, 500), rng.gamma(1.0, 30.0, 50)])
        stats = summary_stats(xs)
        mean = sum(xs) / len(xs)
        m2 = sum((x - mean) ** 2 for x in xs) / len(xs)
        m3 = sum((x - mean) ** 3 for x in xs) / len(xs)
        m4 = sum((x - mean) ** 4 for x in xs) / len(xs)
        var = sum((x - mean) ** 2 for x in xs) / (len(xs) - 1)
        assert stats.mean == pytest.approx(mean, abs=1e-9)
        assert stats.variance == pytest.approx(var, rel=1e-9)
        assert stats.skewness == pytest.approx(m3 / m2**1.5, rel=1e-9)
        assert stats.kurtosis == pytest.approx(m4 / m2**2, rel=1e-9)


class TestQqPoints:
    def test_identical_samples_on_diagonal(self):
        rng = np.random.default_rng(19)
        xs = rng.normal(size=500)
        for a, b in qq_points(xs, xs, k=25):
            assert a == b

    def test_shift_equivariance(self):
        rng = np.random.default_rng(23)
        xs = rng.normal(size=500)
        for (a, b) in qq_points(xs, xs + 3.5, k=25):
            assert b - a == pytest.approx(3.5, abs=1e-9)

    def test_normal_vs_lognormal_concave_pattern(self):
        """Against a heavier right tail the upper quantile gaps grow faster
        than the central ones (concave deviation from the diagonal)."""
        from scipy import stats as st

        probs = [(i - 0.5) / 99 for i in range(1, 100)]
        normal_q = st.norm.ppf(probs, loc=3.0, scale=1.0)
        lognormal_q = st.lognorm.ppf(probs, 0.6, scale=np.exp(1.0))
        rng = np.random.default_rng(29)
        a = rng.normal(3.0, 1.0, size=200_000)
        b = rng.lognormal(1.0, 0.6, size=200_000)
        pairs = qq_points(a, b, k=99)
        sample_gap = np.array([q2 - q1 for q1, q2 in pairs])
        oracle_gap = lognormal_q - normal_q
        # same deviation pattern as the oracle quantiles of both distributions:
        # center below the diagonal gap of both tails, right tail far above
        assert np.corrcoef(sample_gap, oracle_gap)[0, 1] > 0.99
        assert sample_gap[-1] > sample_gap[0] > sample_gap[49]
        assert np.sign(sample_gap[49]) == np.sign(oracle_gap[49]) == -1.0
