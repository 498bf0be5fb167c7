"""Journey delay sampling: compose the transfer and delay models.

One sample walks the planned transfers in order. At each transfer the
transfer model gives a miss probability (conditioned, after a miss, on the
PTT gap to the missed connection through prev_ptt_diff); a Bernoulli draw
decides the outcome. A miss swaps the rest of the plan for an alternative
journey from the current station; three consecutive misses at a station or
a missing alternative abandon the journey (delay NA). At the destination
the delay model contributes the final train's arrival delay on top of the
schedule shift accumulated through re-routing.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .delaymodel.features import DelayFeatures, make_delay_features
from .delaymodel.posterior import MixturePosterior, posterior_predictive_sample
from .errors import SchemaError
from .times import ServiceTime, format_time, minutes_between, parse_service_date, parse_time
from .transfers import MAX_PTT_MINUTES, MIN_PTT_MINUTES, SHORT_TRAIN_MAX_HOURS, TransferFeatures, WINTER_MONTHS

MAX_CONSECUTIVE_MISSES = 3


@dataclass(frozen=True)
class Leg:
    """One planned train ride between two stations."""

    train_id: str
    board_station: str
    alight_station: str
    scheduled_departure: ServiceTime
    scheduled_arrival: ServiceTime
    intercity: bool
    total_runtime: float  # hours, of the whole train run

    def __post_init__(self):
        if minutes_between(self.scheduled_departure, self.scheduled_arrival) <= 0:
            raise ValueError(f"leg {self.train_id} alights before it boards")


@dataclass(frozen=True)
class JourneySpec:
    """Ordered legs; consecutive legs are connected by transfers."""

    legs: tuple

    def __post_init__(self):
        if not self.legs:
            raise ValueError("journey needs at least one leg")

    @property
    def destination(self) -> str:
        return self.legs[-1].alight_station

    @property
    def scheduled_final_arrival(self) -> ServiceTime:
        return self.legs[-1].scheduled_arrival

    @property
    def path(self) -> tuple:
        return tuple(leg.train_id for leg in self.legs)

    def transfer_ptts(self) -> list[float]:
        return [
            minutes_between(a.scheduled_arrival, b.scheduled_departure)
            for a, b in zip(self.legs, self.legs[1:])
        ]

    def validate(self, min_ptt: float = MIN_PTT_MINUTES, max_ptt: float = MAX_PTT_MINUTES):
        """Planned-journey invariants: legs connect and every transfer is in
        the candidate window."""
        for a, b in zip(self.legs, self.legs[1:]):
            if a.alight_station != b.board_station:
                raise SchemaError(
                    f"legs do not connect: {a.train_id} alights {a.alight_station}, "
                    f"{b.train_id} boards {b.board_station}"
                )
        for ptt in self.transfer_ptts():
            if not min_ptt <= ptt <= max_ptt:
                raise SchemaError(f"transfer time {ptt:.1f} min outside [{min_ptt}, {max_ptt}]")
        return self

    def to_json_dict(self) -> dict:
        return {"legs": [_leg_to_dict(leg) for leg in self.legs]}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "JourneySpec":
        try:
            legs = tuple(_leg_from_dict(d) for d in doc["legs"])
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad journey document: {exc}") from exc
        return cls(legs=legs)

    @classmethod
    def load(cls, path: str | Path) -> "JourneySpec":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, path: str | Path, config_hash: str | None = None):
        doc = self.to_json_dict()
        if config_hash:
            doc["config_hash"] = config_hash
        Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def _leg_to_dict(leg: Leg) -> dict:
    return {
        "train_id": leg.train_id,
        "board_station": leg.board_station,
        "alight_station": leg.alight_station,
        "service_date": leg.scheduled_departure.service_date.isoformat(),
        "scheduled_departure": format_time(leg.scheduled_departure),
        "scheduled_arrival": format_time(leg.scheduled_arrival),
        "intercity": leg.intercity,
        "total_runtime_h": leg.total_runtime,
    }


def _leg_from_dict(doc: dict) -> Leg:
    date = parse_service_date(doc["service_date"])
    dep = parse_time(doc["scheduled_departure"], date)
    arr = parse_time(doc["scheduled_arrival"], date)
    if dep is None or arr is None:
        raise SchemaError("leg needs scheduled departure and arrival")
    return Leg(
        train_id=doc["train_id"],
        board_station=doc["board_station"],
        alight_station=doc["alight_station"],
        scheduled_departure=dep,
        scheduled_arrival=arr,
        intercity=bool(doc["intercity"]),
        total_runtime=float(doc["total_runtime_h"]),
    )


def transfer_features_for(arrival_leg: Leg, departure_leg: Leg, prev_ptt: float | None = None) -> TransferFeatures:
    """Transfer-model features for the connection between two legs.

    prev_ptt is the PTT of the transfer missed just before at this station;
    None on a first attempt.
    """
    ptt = minutes_between(arrival_leg.scheduled_arrival, departure_leg.scheduled_departure)
    sched = arrival_leg.scheduled_arrival
    return TransferFeatures(
        ptt=ptt,
        prev_ptt_diff=None if prev_ptt is None else ptt - prev_ptt,
        weekend=int(sched.is_weekend()),
        arr_intercity_hour=sched.hour_of_day() if arrival_leg.intercity else 0,
        arr_short_train=int(arrival_leg.total_runtime < SHORT_TRAIN_MAX_HOURS),
        arr_intercity_winter=int(arrival_leg.intercity and sched.month() in WINTER_MONTHS),
        dep_intercity_train=int(departure_leg.intercity),
    )


def delay_features_for(leg: Leg) -> DelayFeatures:
    return make_delay_features(leg.scheduled_arrival, leg.intercity, leg.total_runtime)


class TransferModel(Protocol):
    def miss_probability(self, features: TransferFeatures) -> float: ...


class DelayModel(Protocol):
    def sample_delay(self, features: DelayFeatures, rng: np.random.Generator) -> float: ...


class BoosterTransferModel:
    """Adapter: trained booster -> per-transfer miss probability."""

    def __init__(self, booster):
        self.booster = booster

    def miss_probability(self, features: TransferFeatures) -> float:
        return float(self.booster.predict_miss_probability(features.to_array().reshape(1, -1))[0])


class PosteriorDelayModel:
    """Adapter: mixture posterior -> final-leg delay draws. An intercept-only
    posterior ignores the leg covariates by definition."""

    def __init__(self, posterior: MixturePosterior):
        self.posterior = posterior

    def sample_delay(self, features: DelayFeatures, rng: np.random.Generator) -> float:
        x = features.to_array() if self.posterior.feature_names else None
        return float(posterior_predictive_sample(self.posterior, x, 1, rng)[0])


class ConstantTransferModel:
    def __init__(self, p_miss: float):
        self.p_miss = float(p_miss)

    def miss_probability(self, features: TransferFeatures) -> float:
        return self.p_miss


class ConstantDelayModel:
    def __init__(self, delay: float = 0.0):
        self.delay = float(delay)

    def sample_delay(self, features: DelayFeatures, rng: np.random.Generator) -> float:
        return self.delay


class AlternativesProvider(Protocol):
    """Strategy for replacing the rest of a journey after a missed transfer.

    ``journey_so_far`` ends with the leg whose transfer was just missed;
    ``remaining`` holds the current plan's legs after that one (a next-train
    strategy needs them to rebuild downstream transfers; richer routing
    providers may ignore them). Returns a journey from the current station
    to ``destination``, or None when no alternative exists.
    """

    def query(
        self, journey_so_far: Sequence[Leg], remaining: Sequence[Leg], destination: str
    ) -> JourneySpec | None: ...


class LegCatalog:
    """Timetable of candidate legs indexed by (board, alight) pair."""

    def __init__(self, legs: Sequence[Leg] = ()):
        self._by_pair: dict = {}
        self._dirty: set = set()
        for leg in legs:
            self.add(leg)

    def add(self, leg: Leg):
        pair = (leg.board_station, leg.alight_station)
        self._by_pair.setdefault(pair, []).append(leg)
        self._dirty.add(pair)

    def _sorted(self, pair) -> list[Leg]:
        legs = self._by_pair.get(pair, ())
        if pair in self._dirty:
            legs.sort(
                key=lambda l: (
                    l.scheduled_departure.service_date,
                    l.scheduled_departure.minutes,
                    l.train_id,
                )
            )
            self._dirty.discard(pair)
        return legs

    def __len__(self) -> int:
        return sum(len(v) for v in self._by_pair.values())

    def legs_between(self, board: str, alight: str) -> list[Leg]:
        return list(self._sorted((board, alight)))

    def next_departure_after(self, board: str, alight: str, after: ServiceTime, *, strict: bool) -> Leg | None:
        """Earliest leg on the pair departing after ``after`` (strictly or
        not) on the same service day."""
        for leg in self._sorted((board, alight)):
            if leg.scheduled_departure.service_date != after.service_date:
                continue
            gap = minutes_between(after, leg.scheduled_departure)
            if gap > 0 or (not strict and gap >= 0):
                return leg
        return None

    def write_csv(self, path: str | Path, config_hash: str | None = None):
        with open(path, "w", newline="", encoding="utf-8") as handle:
            if config_hash:
                handle.write(f"# config_hash={config_hash}\n")
            writer = csv.writer(handle)
            writer.writerow(LEG_COLUMNS)
            for pair in sorted(self._by_pair):
                for leg in self._sorted(pair):
                    writer.writerow(
                        [
                            leg.train_id,
                            leg.board_station,
                            leg.alight_station,
                            leg.scheduled_departure.service_date.isoformat(),
                            format_time(leg.scheduled_departure),
                            format_time(leg.scheduled_arrival),
                            int(leg.intercity),
                            repr(leg.total_runtime),
                        ]
                    )

    @classmethod
    def from_csv(cls, path: str | Path) -> "LegCatalog":
        catalog = cls()
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(line for line in handle if not line.startswith("#"))
            if reader.fieldnames is None or not set(LEG_COLUMNS).issubset(reader.fieldnames):
                raise SchemaError(f"legs file needs columns {list(LEG_COLUMNS)}")
            for row in reader:
                date = parse_service_date(row["service_date"])
                dep = parse_time(row["sched_dep"], date)
                arr = parse_time(row["sched_arr"], date)
                if dep is None or arr is None:
                    raise SchemaError("leg rows need sched_dep and sched_arr")
                catalog.add(
                    Leg(
                        train_id=row["train_id"],
                        board_station=row["board_station"],
                        alight_station=row["alight_station"],
                        scheduled_departure=dep,
                        scheduled_arrival=arr,
                        intercity=bool(int(row["intercity"])),
                        total_runtime=float(row["total_runtime_h"]),
                    )
                )
        return catalog


LEG_COLUMNS = (
    "train_id",
    "board_station",
    "alight_station",
    "service_date",
    "sched_dep",
    "sched_arr",
    "intercity",
    "total_runtime_h",
)


class NextTrainAlternatives:
    """Replace a missed leg with the next train on the same station pair.

    Downstream transfers are recomputed against the replacement's arrival;
    a recomputed connection under the minimum transfer time is infeasible
    and is in turn replaced by the next train on its own pair. Everything
    stays within the missed departure's service day.
    """

    def __init__(self, catalog: LegCatalog, min_transfer: float = MIN_PTT_MINUTES):
        self.catalog = catalog
        self.min_transfer = min_transfer

    def query(
        self, journey_so_far: Sequence[Leg], remaining: Sequence[Leg], destination: str
    ) -> JourneySpec | None:
        if len(journey_so_far) < 2:
            raise ValueError("journey so far must contain the incoming leg and the missed leg")
        missed = journey_so_far[-1]
        incoming = journey_so_far[-2]
        replacement = self.catalog.next_departure_after(
            missed.board_station,
            missed.alight_station,
            missed.scheduled_departure,
            strict=True,
        )
        while replacement is not None:
            ptt = minutes_between(incoming.scheduled_arrival, replacement.scheduled_departure)
            if ptt >= self.min_transfer:
                tail = self._rebuild_tail(replacement, remaining)
                if tail is not None:
                    return JourneySpec(legs=tuple(tail))
            replacement = self.catalog.next_departure_after(
                missed.board_station,
                missed.alight_station,
                replacement.scheduled_departure,
                strict=True,
            )
        return None

    def _rebuild_tail(self, replacement: Leg, remaining: Sequence[Leg]) -> list[Leg] | None:
        tail = [replacement]
        current = replacement
        for planned in remaining:
            gap = minutes_between(current.scheduled_arrival, planned.scheduled_departure)
            if gap >= self.min_transfer:
                tail.append(planned)
                current = planned
                continue
            substitute = self.catalog.next_departure_after(
                planned.board_station,
                planned.alight_station,
                current.scheduled_arrival.add_minutes(self.min_transfer),
                strict=False,
            )
            if substitute is None:
                return None
            tail.append(substitute)
            current = substitute
        return tail


@dataclass(frozen=True)
class JourneyOutcome:
    """One sampled realization: final delay in minutes (None = abandoned),
    the trains actually used, and why the journey was abandoned, if it was."""

    delay: float | None
    path: tuple
    abandoned_reason: str | None = None


def sample_journey_delay(
    plan: JourneySpec,
    transfer_model: TransferModel,
    delay_model: DelayModel,
    alternatives: AlternativesProvider | None,
    rng: np.random.Generator,
    max_consecutive_misses: int = MAX_CONSECUTIVE_MISSES,
) -> JourneyOutcome:
    """One delay sample for the planned journey.

    Walks transfers in plan order; first attempts carry prev_ptt_diff=NA,
    alternatives after a miss carry the PTT difference to the missed
    transfer. A reached transfer resets the conditioning. The returned
    delay is the schedule shift of the realized journey plus a posterior
    draw of the last used train's arrival delay.
    """
    current_plan = plan
    traveled: list[Leg] = [plan.legs[0]]
    prev_missed_ptt: float | None = None
    consecutive_misses = 0

    while traveled[-1].alight_station != plan.destination:
        position = len(traveled)
        next_leg = current_plan.legs[position]
        features = transfer_features_for(traveled[-1], next_leg, prev_missed_ptt)
        p_miss = transfer_model.miss_probability(features)
        reached = rng.random() >= p_miss
        if reached:
            traveled.append(next_leg)
            prev_missed_ptt = None
            consecutive_misses = 0
            continue
        consecutive_misses += 1
        if consecutive_misses >= max_consecutive_misses:
            return JourneyOutcome(
                delay=None,
                path=tuple(leg.train_id for leg in traveled),
                abandoned_reason="cutoff",
            )
        prev_missed_ptt = features.ptt
        replacement_tail = None
        if alternatives is not None:
            replacement_tail = alternatives.query(
                traveled + [next_leg], current_plan.legs[position + 1 :], plan.destination
            )
        if replacement_tail is None:
            return JourneyOutcome(
                delay=None,
                path=tuple(leg.train_id for leg in traveled),
                abandoned_reason="no_alternative",
            )
        current_plan = JourneySpec(legs=tuple(traveled) + replacement_tail.legs)

    schedule_shift = minutes_between(plan.scheduled_final_arrival, traveled[-1].scheduled_arrival)
    final_delay = delay_model.sample_delay(delay_features_for(traveled[-1]), rng)
    return JourneyOutcome(
        delay=schedule_shift + final_delay,
        path=tuple(leg.train_id for leg in traveled),
    )


@dataclass
class DelaySampleSet:
    """The sampled delay distribution for one planned journey."""

    planned_path: tuple
    outcomes: list

    @property
    def n(self) -> int:
        return len(self.outcomes)

    @property
    def delays(self) -> list:
        """Delay per sample, None for abandoned journeys."""
        return [o.delay for o in self.outcomes]

    @property
    def completed_delays(self) -> np.ndarray:
        return np.asarray([o.delay for o in self.outcomes if o.delay is not None], dtype=float)

    @property
    def na_fraction(self) -> float:
        if not self.outcomes:
            return 0.0
        return sum(1 for o in self.outcomes if o.delay is None) / len(self.outcomes)

    def write_csv(self, path: str | Path, config_hash: str | None = None):
        with open(path, "w", newline="", encoding="utf-8") as handle:
            if config_hash:
                handle.write(f"# config_hash={config_hash}\n")
            writer = csv.writer(handle)
            writer.writerow(["sample_index", "delay_minutes", "path_signature"])
            for i, o in enumerate(self.outcomes):
                writer.writerow([i, "" if o.delay is None else repr(o.delay), "|".join(o.path)])


def sample_many(
    plan: JourneySpec,
    transfer_model: TransferModel,
    delay_model: DelayModel,
    alternatives: AlternativesProvider | None,
    n: int,
    seed: int = 0,
    max_consecutive_misses: int = MAX_CONSECUTIVE_MISSES,
) -> DelaySampleSet:
    """n independent journey samples; each sample gets its own counter-derived
    RNG stream, so results do not depend on execution order."""
    if n < 1:
        raise ValueError("need at least one sample")
    outcomes = []
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        outcomes.append(
            sample_journey_delay(
                plan, transfer_model, delay_model, alternatives, rng, max_consecutive_misses
            )
        )
    return DelaySampleSet(planned_path=plan.path, outcomes=outcomes)
