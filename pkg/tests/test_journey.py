import datetime as dt

import numpy as np
import pytest

from _oracles import binomial_bounds, ks_distance
from railreliability.errors import SchemaError
from railreliability.journey import (
    BoosterTransferModel,
    ConstantDelayModel,
    ConstantTransferModel,
    JourneySpec,
    Leg,
    LegCatalog,
    NextTrainAlternatives,
    PosteriorDelayModel,
    sample_journey_delay,
    sample_many,
)
from railreliability.times import ServiceTime
from test_delaymodel import point_mass_posterior

DATE = dt.date(2024, 7, 9)


def st(text: str) -> ServiceTime:
    hh, mm = text.split(":")
    return ServiceTime(DATE, int(hh) * 60.0 + int(mm))


def leg(train_id, board, alight, dep, arr, intercity=False, runtime=3.0) -> Leg:
    return Leg(
        train_id=train_id,
        board_station=board,
        alight_station=alight,
        scheduled_departure=st(dep),
        scheduled_arrival=st(arr),
        intercity=intercity,
        total_runtime=runtime,
    )


@pytest.fixture
def two_leg_plan():
    return JourneySpec(
        legs=(
            leg("T1", "A", "B", "10:21", "13:26", intercity=True),
            leg("T2", "B", "C", "13:39", "14:28"),
        )
    ).validate()


@pytest.fixture
def hourly_catalog(two_leg_plan):
    catalog = LegCatalog(list(two_leg_plan.legs))
    for i, (dep, arr) in enumerate([("14:39", "15:28"), ("15:39", "16:28"), ("16:39", "17:28")]):
        catalog.add(leg(f"ALT{i}", "B", "C", dep, arr))
    return catalog


class RecordingModel:
    """Stub transfer model that logs the feature rows it is asked about."""

    def __init__(self, p_miss_sequence):
        self.p_miss_sequence = list(p_miss_sequence)
        self.seen = []

    def miss_probability(self, features):
        self.seen.append(features)
        return self.p_miss_sequence[min(len(self.seen) - 1, len(self.p_miss_sequence) - 1)]


class TestSpecValidation:
    def test_disconnected_legs_rejected(self):
        with pytest.raises(SchemaError):
            JourneySpec(
                legs=(leg("T1", "A", "B", "10:00", "11:00"), leg("T2", "X", "C", "11:10", "12:00"))
            ).validate()

    def test_window_violation_rejected(self):
        with pytest.raises(SchemaError):
            JourneySpec(
                legs=(leg("T1", "A", "B", "10:00", "11:00"), leg("T2", "B", "C", "12:30", "13:00"))
            ).validate()

    def test_json_round_trip(self, two_leg_plan, tmp_path):
        path = tmp_path / "journey.json"
        two_leg_plan.save(path)
        loaded = JourneySpec.load(path)
        assert loaded == two_leg_plan


class TestSingleSample:
    def test_single_leg_never_consults_transfer_model(self):
        plan = JourneySpec(legs=(leg("T1", "A", "B", "10:00", "11:00"),))
        model = RecordingModel([0.5])
        outcome = sample_journey_delay(
            plan, model, ConstantDelayModel(2.5), None, np.random.default_rng(0)
        )
        assert outcome.delay == 2.5
        assert model.seen == []
        assert outcome.path == ("T1",)

    def test_sure_transfer_zero_delay(self, two_leg_plan):
        outcome = sample_journey_delay(
            two_leg_plan, ConstantTransferModel(0.0), ConstantDelayModel(0.0),
            None, np.random.default_rng(0),
        )
        assert outcome.delay == 0.0
        assert outcome.path == ("T1", "T2")

    def test_missed_transfer_next_train_sixty_minutes(self, two_leg_plan, hourly_catalog):
        """Planned connection always missed; the +60 min train is taken."""
        miss_first = RecordingModel([1.0, 0.0])
        outcome = sample_journey_delay(
            two_leg_plan, miss_first, ConstantDelayModel(0.0),
            NextTrainAlternatives(hourly_catalog), np.random.default_rng(1),
        )
        assert outcome.delay == 60.0
        assert outcome.path == ("T1", "ALT0")

    def test_prev_ptt_diff_conditioning(self, two_leg_plan, hourly_catalog):
        """First attempt NA; the alternative carries PTT(alt) - PTT(missed)."""
        model = RecordingModel([1.0, 0.0])
        sample_journey_delay(
            two_leg_plan, model, ConstantDelayModel(0.0),
            NextTrainAlternatives(hourly_catalog), np.random.default_rng(2),
        )
        first, second = model.seen
        assert first.prev_ptt_diff is None
        assert first.ptt == 13.0
        assert second.ptt == 73.0
        assert second.prev_ptt_diff == 60.0

    def test_cutoff_after_three_consecutive_misses(self, two_leg_plan, hourly_catalog):
        model = RecordingModel([1.0])
        outcome = sample_journey_delay(
            two_leg_plan, model, ConstantDelayModel(0.0),
            NextTrainAlternatives(hourly_catalog), np.random.default_rng(3),
        )
        assert outcome.delay is None
        assert outcome.abandoned_reason == "cutoff"
        assert len(model.seen) == 3

    def test_no_alternative_is_na(self, two_leg_plan):
        outcome = sample_journey_delay(
            two_leg_plan, ConstantTransferModel(1.0), ConstantDelayModel(0.0),
            None, np.random.default_rng(4),
        )
        assert outcome.delay is None
        assert outcome.abandoned_reason == "no_alternative"

    def test_reached_transfer_resets_conditioning(self, hourly_catalog):
        plan = JourneySpec(
            legs=(
                leg("T1", "A", "B", "10:21", "13:26"),
                leg("T2", "B", "C", "13:39", "14:28"),
                leg("T3", "C", "D", "14:40", "15:10"),
            )
        ).validate()
        model = RecordingModel([1.0, 0.0, 0.0])  # miss planned B-C, reach ALT0, reach C-D
        catalog = LegCatalog(list(plan.legs))
        for i, (dep, arr) in enumerate([("14:39", "15:28")]):
            catalog.add(leg(f"ALT{i}", "B", "C", dep, arr))
        catalog.add(leg("T3b", "C", "D", "15:40", "16:10"))
        sample_journey_delay(
            plan, model, ConstantDelayModel(0.0),
            NextTrainAlternatives(catalog), np.random.default_rng(5),
        )
        assert model.seen[1].prev_ptt_diff == 60.0  # alternative at B
        assert model.seen[2].prev_ptt_diff is None  # fresh transfer at C


class TestNextTrainAlternatives:
    def test_earliest_later_train_chosen(self, two_leg_plan, hourly_catalog):
        provider = NextTrainAlternatives(hourly_catalog)
        tail = provider.query(list(two_leg_plan.legs), [], "C")
        assert tail is not None
        assert tail.legs[0].train_id == "ALT0"

    def test_no_later_train_that_day(self, two_leg_plan):
        catalog = LegCatalog(list(two_leg_plan.legs))
        provider = NextTrainAlternatives(catalog)
        assert provider.query(list(two_leg_plan.legs), [], "C") is None

    def test_downstream_transfers_recomputed(self):
        plan = JourneySpec(
            legs=(
                leg("T1", "A", "B", "10:21", "13:26"),
                leg("T2", "B", "C", "13:39", "14:28"),
                leg("T3", "C", "D", "14:40", "15:10"),
            )
        ).validate()
        catalog = LegCatalog(list(plan.legs))
        # replacement for B-C arrives 15:58 -> planned 14:40 C-D departure infeasible
        catalog.add(leg("ALT", "B", "C", "15:09", "15:58"))
        catalog.add(leg("T3b", "C", "D", "16:40", "17:10"))
        provider = NextTrainAlternatives(catalog)
        tail = provider.query(list(plan.legs[:2]), list(plan.legs[2:]), "D")
        assert tail is not None
        assert [l.train_id for l in tail.legs] == ["ALT", "T3b"]

    def test_feasible_downstream_kept(self):
        plan = JourneySpec(
            legs=(
                leg("T1", "A", "B", "10:21", "13:26"),
                leg("T2", "B", "C", "13:39", "14:28"),
                leg("T3", "C", "D", "14:40", "15:10"),
            )
        ).validate()
        catalog = LegCatalog(list(plan.legs))
        catalog.add(leg("ALT", "B", "C", "13:55", "14:35"))  # C-D at 14:40 still feasible (5 min)
        provider = NextTrainAlternatives(catalog)
        tail = provider.query(list(plan.legs[:2]), list(plan.legs[2:]), "D")
        assert [l.train_id for l in tail.legs] == ["ALT", "T3"]


class TestSampleMany:
    def test_one_sample(self, two_leg_plan):
        ss = sample_many(two_leg_plan, ConstantTransferModel(0.0), ConstantDelayModel(0.0), None, n=1)
        assert ss.n == 1

    def test_seed_determinism(self, two_leg_plan, hourly_catalog):
        args = (two_leg_plan, ConstantTransferModel(0.3), ConstantDelayModel(1.0),
                NextTrainAlternatives(hourly_catalog))
        a = sample_many(*args, n=300, seed=7)
        b = sample_many(*args, n=300, seed=7)
        assert a.outcomes == b.outcomes

    def test_reached_fraction_binomial(self, two_leg_plan, hourly_catalog):
        ss = sample_many(
            two_leg_plan, ConstantTransferModel(0.1), ConstantDelayModel(0.0),
            NextTrainAlternatives(hourly_catalog), n=1000, seed=8,
        )
        planned = sum(1 for o in ss.outcomes if o.path == ss.planned_path)
        low, high = binomial_bounds(1000, 0.9)
        assert low <= planned / 1000 <= high

    def test_schedule_shift_additivity_with_zero_delay(self, two_leg_plan, hourly_catalog):
        """With the delay model stubbed to 0 every sample equals the schedule
        shift of its realized path exactly (multiples of 60 here)."""
        ss = sample_many(
            two_leg_plan, ConstantTransferModel(0.4), ConstantDelayModel(0.0),
            NextTrainAlternatives(hourly_catalog), n=400, seed=9,
        )
        for outcome in ss.outcomes:
            if outcome.delay is None:
                continue
            hops = len([t for t in outcome.path if t.startswith("ALT")])
            expected = {("T1", "T2"): 0.0, ("T1", "ALT0"): 60.0, ("T1", "ALT1"): 120.0,
                        ("T1", "ALT2"): 180.0}[outcome.path]
            assert outcome.delay == expected

    def test_two_independent_transfers_path_fraction(self):
        plan = JourneySpec(
            legs=(
                leg("T1", "A", "B", "09:00", "10:00"),
                leg("T2", "B", "C", "10:15", "11:00"),
                leg("T3", "C", "D", "11:15", "12:00"),
            )
        ).validate()
        ss = sample_many(plan, ConstantTransferModel(0.1), ConstantDelayModel(0.0), None, n=4000, seed=10)
        on_plan = sum(1 for o in ss.outcomes if o.delay is not None and o.path == plan.path)
        low, high = binomial_bounds(4000, 0.81)
        assert low <= on_plan / 4000 <= high

    def test_na_iff_cutoff_or_no_alternative(self, two_leg_plan, hourly_catalog):
        ss = sample_many(
            two_leg_plan, ConstantTransferModel(0.5), ConstantDelayModel(0.0),
            NextTrainAlternatives(hourly_catalog), n=500, seed=11,
        )
        for o in ss.outcomes:
            assert (o.delay is None) == (o.abandoned_reason in ("cutoff", "no_alternative"))

    def test_single_leg_distribution_matches_posterior(self):
        from railreliability.delaymodel import MixtureCoefficients as MC

        zero_slopes = MC(
            weights=[0.28, 0.72],
            beta_mu=[[2.03, 0.0, 0.0, 0.0], [1.79, 0.0, 0.0, 0.0]],
            beta_logsigma=[[-0.45, 0.0, 0.0, 0.0], [-1.64, 0.0, 0.0, 0.0]],
        )
        posterior = point_mass_posterior(zero_slopes)
        plan = JourneySpec(legs=(leg("T1", "A", "B", "10:00", "11:00", intercity=False),))
        ss = sample_many(
            plan, ConstantTransferModel(0.0), PosteriorDelayModel(posterior), None, n=3000, seed=12
        )
        from railreliability.delaymodel.posterior import posterior_predictive_sample

        x = np.array([3.0, 0.0, 0.0])  # runtime of the leg, off-window regional
        direct = posterior_predictive_sample(posterior, x, 3000, np.random.default_rng(13))
        assert ks_distance([o.delay for o in ss.outcomes], direct.tolist()) < 0.05

    def test_all_transfers_sure_matches_last_leg_predictive(self):
        """Transfer probabilities stubbed to 1: the journey delay is the
        delay model's posterior predictive for the last leg."""
        from railreliability.delaymodel import MixtureCoefficients as MC
        from railreliability.delaymodel.posterior import posterior_predictive_sample

        zero_slopes = MC(
            weights=[0.28, 0.72],
            beta_mu=[[2.03, 0.0, 0.0, 0.0], [1.79, 0.0, 0.0, 0.0]],
            beta_logsigma=[[-0.45, 0.0, 0.0, 0.0], [-1.64, 0.0, 0.0, 0.0]],
        )
        posterior = point_mass_posterior(zero_slopes)
        plan = JourneySpec(
            legs=(
                leg("T1", "A", "B", "09:00", "10:00"),
                leg("T2", "B", "C", "10:15", "11:00"),
                leg("T3", "C", "D", "11:15", "12:00"),
            )
        ).validate()
        ss = sample_many(
            plan, ConstantTransferModel(0.0), PosteriorDelayModel(posterior), None, n=3000, seed=20
        )
        direct = posterior_predictive_sample(
            posterior, np.array([3.0, 0.0, 0.0]), 3000, np.random.default_rng(21)
        )
        assert ks_distance([o.delay for o in ss.outcomes], direct.tolist()) < 0.05
        assert all(o.path == plan.path for o in ss.outcomes)

    def test_csv_write(self, two_leg_plan, tmp_path):
        ss = sample_many(two_leg_plan, ConstantTransferModel(1.0), ConstantDelayModel(0.0), None, n=5)
        path = tmp_path / "samples.csv"
        ss.write_csv(path, config_hash="aa")
        text = path.read_text(encoding="utf-8")
        assert text.startswith("# config_hash=aa")
        assert "sample_index,delay_minutes,path_signature" in text
        assert text.count("\n") == 7  # header + comment + 5 rows


class TestBoosterAdapter:
    def test_adapter_matches_direct_prediction(self):
        from railreliability.boosting import TransferMissBooster
        from railreliability.journey import transfer_features_for
        from railreliability.synth import SynthConfig, generate_labeled_transfers

        X, y, _ = generate_labeled_transfers(SynthConfig(seed=1), 1500)
        booster = TransferMissBooster(n_rounds=10, max_depth=3).fit(X, y)
        a = leg("T1", "A", "B", "10:21", "13:26", intercity=True, runtime=3.05)
        b = leg("T2", "B", "C", "13:39", "14:28")
        features = transfer_features_for(a, b)
        adapter = BoosterTransferModel(booster)
        direct = booster.predict_miss_probability(features.to_array().reshape(1, -1))[0]
        assert adapter.miss_probability(features) == direct
