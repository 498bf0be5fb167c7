"""Ground-truth synthetic corpus: events, transfers, delays, journeys.

Everything is generated from known processes (a logistic miss-probability
surface for transfers, the lognormal mixture for delays), so the models
can be validated by recovery against the generating truth. A misspecified
mode draws delays from a gamma distribution instead, for exercising the
posterior-predictive mismatch checks. The emitted CSV files use the exact
ingestion schemas, so the synthetic path runs through the full pipeline.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .delaymodel.density import MixtureCoefficients, design_matrix
from .delaymodel.features import make_delay_features
from .events import RuntimeTable, TrainEvent, write_events_csv
from .journey import Leg, JourneySpec, LegCatalog
from .times import ServiceTime, minutes_between

# Fitted-style generating coefficients for the delay mixture: component 1 is
# the low-weight high-variance component. Columns: intercept, total_runtime,
# mid_day_afternoon_intercity, evening_night_intercity.
DEFAULT_DELAY_COEFFICIENTS = MixtureCoefficients(
    weights=np.array([0.28, 0.72]),
    beta_mu=np.array([[2.03, 0.15, 0.03, 0.47], [1.79, 0.01, 0.01, 0.12]]),
    beta_logsigma=np.array([[-0.45, 0.04, 0.35, 0.26], [-1.64, 0.13, 0.19, 0.35]]),
)

INTERCEPT_ONLY_DELAY_COEFFICIENTS = MixtureCoefficients(
    weights=np.array([0.28, 0.72]),
    beta_mu=np.array([[2.03], [1.79]]),
    beta_logsigma=np.array([[-0.45], [-1.64]]),
)


@dataclass(frozen=True)
class TransferGroundTruth:
    """Logistic miss-probability surface over the transfer features.

    P(miss) = sigmoid(intercept + ptt_slope * PTT + feature terms); the PTT
    slope must be non-positive so longer transfers are never less reliable.
    The default calibration gives a ~5% overall miss rate with PTT uniform
    on [3, 60] and a maximum miss probability safely below 0.3.
    """

    intercept: float = -1.006
    ptt_slope: float = -0.0866
    weekend: float = 0.05
    arr_intercity_hour: float = 0.002
    arr_short_train: float = -0.04
    arr_intercity_winter: float = 0.04
    dep_intercity_train: float = -0.04
    prev_present: float = 0.05
    prev_diff_slope: float = -0.001

    def __post_init__(self):
        if self.ptt_slope > 0:
            raise ValueError("ptt_slope must be <= 0")

    def logits(self, X: np.ndarray) -> np.ndarray:
        """X in the transfer feature layout (see transfers.FEATURE_NAMES)."""
        prev = X[:, 1]
        prev_present = ~np.isnan(prev)
        z = (
            self.intercept
            + self.ptt_slope * X[:, 0]
            + self.weekend * X[:, 2]
            + self.arr_intercity_hour * X[:, 3]
            + self.arr_short_train * X[:, 4]
            + self.arr_intercity_winter * X[:, 5]
            + self.dep_intercity_train * X[:, 6]
        )
        z = z + np.where(prev_present, self.prev_present + self.prev_diff_slope * np.nan_to_num(prev), 0.0)
        return z

    def miss_probability(self, X: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.logits(X)))


@dataclass(frozen=True)
class DelayGroundTruth:
    coefficients: MixtureCoefficients = DEFAULT_DELAY_COEFFICIENTS
    shift: float = 6.0
    gamma_shape: float = 1.5  # misspecified mode
    gamma_scale: float = 4.0

    def _design(self, X) -> np.ndarray:
        """Design matrix cut down to the coefficient width, so intercept-only
        truths work against feature-rich generators."""
        design = design_matrix(X)
        width = self.coefficients.beta_mu.shape[1]
        if design.shape[1] < width:
            raise ValueError(f"need {width - 1} features, got {design.shape[1] - 1}")
        return design[:, :width]

    def sample(self, X, rng: np.random.Generator, misspecified: bool = False) -> np.ndarray:
        """Delays (minutes) for feature rows X; lower-bounded by -shift in
        the well-specified mode."""
        design = self._design(X)
        n = design.shape[0]
        if misspecified:
            return rng.gamma(self.gamma_shape, self.gamma_scale, size=n) - 2.0
        coef = self.coefficients
        mu = design @ coef.beta_mu.T
        sigma = np.exp(design @ coef.beta_logsigma.T)
        comp = (rng.random(n) >= coef.weights[0]).astype(int) if coef.n_components == 2 else np.zeros(n, int)
        rows = np.arange(n)
        z = rng.lognormal(mean=mu[rows, comp], sigma=sigma[rows, comp])
        return z - self.shift

    def mixture_mean(self, x=None) -> float:
        """Closed-form mean delay for one feature row (default: intercepts)."""
        design = self._design(np.asarray(x, dtype=float)) if x is not None else design_matrix(None)
        coef = self.coefficients
        mu = (design @ coef.beta_mu.T)[0]
        sigma = np.exp(design @ coef.beta_logsigma.T)[0]
        return float(np.sum(coef.weights * np.exp(mu + sigma**2 / 2.0))) - self.shift


@dataclass(frozen=True)
class SynthConfig:
    n_stations: int = 6
    trains_per_day: int = 40
    headway_minutes: float = 20.0
    hop_minutes: float = 22.0
    dwell_minutes: float = 2.0
    intercity_fraction: float = 0.4
    start_date: dt.date = dt.date(2024, 1, 15)
    day_start_minutes: float = 6 * 60.0
    transfer_truth: TransferGroundTruth = field(default_factory=TransferGroundTruth)
    delay_truth: DelayGroundTruth = field(default_factory=DelayGroundTruth)
    misspecified_delays: bool = False
    max_delay_minutes: float = 599.0  # keeps every event inside the filter bounds
    seed: int = 0

    def station_name(self, i: int) -> str:
        return f"S{i:02d}"


def _truncate(delays: np.ndarray, config: SynthConfig) -> np.ndarray:
    return np.minimum(delays, config.max_delay_minutes)


def generate_events(config: SynthConfig, days: int) -> list[TrainEvent]:
    """Timetabled trains over a line network with mixture-drawn delays.

    Each train runs the full line (alternating direction), departures are
    on a fixed headway grid, arrival delays come from the ground-truth
    process; departure delays propagate the arrival delay but never leave
    early. Runtime fields are populated, so the corpus passes filtering
    with zero drops.
    """
    rng = np.random.default_rng(config.seed)
    events: list[TrainEvent] = []
    n = config.n_stations
    mid = n // 2
    # travel time from each end of the line to the mid station
    to_mid_fwd = mid * config.hop_minutes + max(0, mid - 1) * config.dwell_minutes
    to_mid_bwd = (n - 1 - mid) * config.hop_minutes + max(0, n - 2 - mid) * config.dwell_minutes

    for day in range(days):
        date = config.start_date + dt.timedelta(days=day)
        for t in range(config.trains_per_day):
            # six-slot cycle: full line and both halves, each direction.
            # Trains starting at the mid station are offset so they leave 12
            # minutes after the previous slot's arrival from the other half
            # (and 32 after the full train two slots before), giving every
            # wave real in-window transfers while runtimes vary per span.
            slot = t % 6
            offset = 0.0
            if slot == 0:
                stations = list(range(n))
            elif slot == 1:
                stations = list(range(0, mid + 1))
            elif slot == 2:
                stations = list(range(mid, n))
                offset = to_mid_fwd - (config.headway_minutes - 12.0)
            elif slot == 3:
                stations = list(range(n - 1, -1, -1))
            elif slot == 4:
                stations = list(range(n - 1, mid - 1, -1))
            else:
                stations = list(range(mid, -1, -1))
                offset = to_mid_bwd - (2 * config.headway_minutes - 12.0)
            n_stops = len(stations)
            total_minutes = (n_stops - 1) * config.hop_minutes + (n_stops - 2) * config.dwell_minutes
            total_hours = total_minutes / 60.0
            intercity = rng.random() < config.intercity_fraction
            if intercity:
                operator, category = "SJ", "Snabbtåg"
            else:
                operator, category = "Regio AB", "Regional"
            train_id = f"T{day:03d}{t:03d}"
            base_dep = max(0.0, config.day_start_minutes + t * config.headway_minutes + offset)
            origin = config.station_name(stations[0])
            destination = config.station_name(stations[-1])

            sched_arrs: list[ServiceTime | None] = []
            sched_deps: list[ServiceTime | None] = []
            cursor = base_dep
            for pos in range(n_stops):
                if pos == 0:
                    sched_arrs.append(None)
                    sched_deps.append(ServiceTime(date, cursor))
                else:
                    cursor += config.hop_minutes
                    arr = ServiceTime(date, cursor)
                    sched_arrs.append(arr)
                    if pos == n_stops - 1:
                        sched_deps.append(None)
                    else:
                        cursor += config.dwell_minutes
                        sched_deps.append(ServiceTime(date, cursor))

            arr_delays = np.zeros(n_stops)
            for pos in range(1, n_stops):
                feats = make_delay_features(sched_arrs[pos], intercity, total_hours)
                draw = config.delay_truth.sample(
                    feats.to_array().reshape(1, -1), rng, config.misspecified_delays
                )
                arr_delays[pos] = _truncate(draw, config)[0]

            for pos, station_idx in enumerate(stations):
                station = config.station_name(station_idx)
                sched_arr = sched_arrs[pos]
                sched_dep = sched_deps[pos]
                act_arr = None if sched_arr is None else sched_arr.add_minutes(arr_delays[pos])
                if sched_dep is None:
                    act_dep = None
                elif pos == 0:
                    act_dep = sched_dep
                else:
                    dep_delay = max(0.0, arr_delays[pos] - config.dwell_minutes / 2.0)
                    act_dep = sched_dep.add_minutes(dep_delay)
                    if act_arr is not None and minutes_between(act_arr, act_dep) < 0.5:
                        act_dep = act_arr.add_minutes(0.5)
                runtime_to_here = (
                    0.0 if sched_arr is None else minutes_between(ServiceTime(date, base_dep), sched_arr) / 60.0
                )
                events.append(
                    TrainEvent(
                        train_id=train_id,
                        operator=operator,
                        train_category=category,
                        station=station,
                        service_date=date,
                        scheduled_arrival=sched_arr,
                        scheduled_departure=sched_dep,
                        actual_arrival=act_arr,
                        actual_departure=act_dep,
                        origin=origin,
                        destination=destination,
                        runtime_to_here=runtime_to_here,
                        total_runtime=total_hours,
                    )
                )
    return events


def runtime_table_for(events) -> RuntimeTable:
    table = RuntimeTable()
    for e in events:
        if e.runtime_to_here is not None and e.total_runtime is not None:
            table.add(e.train_id, e.service_date, e.station, e.runtime_to_here, e.total_runtime)
    return table


def generate_labeled_transfers(
    config: SynthConfig, n: int, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(X, y, p_true) in the transfer feature layout; labels drawn Bernoulli
    from the logistic ground truth. PTT is uniform on [3, 60]; about 30% of
    rows carry a prev_ptt_diff (alternative attempts)."""
    if n < 1:
        raise ValueError("need n >= 1")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    ptt = rng.uniform(3.0, 60.0, size=n)
    prev = np.where(rng.random(n) < 0.3, rng.uniform(1.0, 40.0, size=n), np.nan)
    weekend = (rng.random(n) < 2.0 / 7.0).astype(float)
    arr_ic = rng.random(n) < config.intercity_fraction
    hour = np.where(arr_ic, rng.integers(5, 24, size=n), 0).astype(float)
    short = (rng.random(n) < 0.35).astype(float)
    winter = (arr_ic & (rng.random(n) < 0.25)).astype(float)
    dep_ic = (rng.random(n) < config.intercity_fraction).astype(float)
    X = np.column_stack([ptt, prev, weekend, hour, short, winter, dep_ic])
    p_true = config.transfer_truth.miss_probability(X)
    y = (rng.random(n) < p_true).astype(float)
    return X, y, p_true


def pairwise_auroc(scores, labels, chunk: int = 512) -> float:
    """Brute-force AUROC over every positive-negative pair (ties count 1/2).

    Quadratic on purpose: this is the oracle the rank-based implementation
    is checked against, and the Bayes-ceiling computation for recovery tests.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("need both classes")
    wins = 0.0
    for start in range(0, pos.size, chunk):
        block = pos[start : start + chunk, None]
        wins += float(np.sum(block > neg[None, :])) + 0.5 * float(np.sum(block == neg[None, :]))
    return wins / (pos.size * neg.size)


def legs_from_events(events) -> LegCatalog:
    """Catalog of all single-train legs (every ordered station pair a train
    serves), for journey planning and next-train alternatives."""
    by_train: dict = {}
    for e in events:
        by_train.setdefault((e.train_id, e.service_date), []).append(e)
    catalog = LegCatalog()
    for (train_id, _date), evs in sorted(by_train.items()):
        ordered = sorted(
            evs,
            key=lambda e: (e.scheduled_departure or e.scheduled_arrival).minutes,
        )
        intercity = ordered[0].operator == "SJ"
        total = ordered[0].total_runtime or 0.0
        for i, board in enumerate(ordered):
            if board.scheduled_departure is None:
                continue
            for alight in ordered[i + 1 :]:
                if alight.scheduled_arrival is None:
                    continue
                catalog.add(
                    Leg(
                        train_id=train_id,
                        board_station=board.station,
                        alight_station=alight.station,
                        scheduled_departure=board.scheduled_departure,
                        scheduled_arrival=alight.scheduled_arrival,
                        intercity=intercity,
                        total_runtime=total,
                    )
                )
    return catalog


def build_example_journey(catalog: LegCatalog, config: SynthConfig) -> JourneySpec:
    """A two-leg journey with an in-window transfer, taken from the catalog."""
    a = config.station_name(0)
    mid = config.station_name(config.n_stations // 2)
    b = config.station_name(config.n_stations - 1)
    for first in catalog.legs_between(a, mid):
        for second in catalog.legs_between(mid, b):
            ptt = minutes_between(first.scheduled_arrival, second.scheduled_departure)
            if 3.0 <= ptt <= 60.0 and second.train_id != first.train_id:
                return JourneySpec(legs=(first, second)).validate()
    raise ValueError("no in-window transfer found; corpus too small")


def emit_corpus(config: SynthConfig, days: int, out_dir: str | Path, config_hash: str | None = None) -> dict:
    """Write events.csv (+ runtimes.csv, legs.csv, journey.json, truth.json)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    events = generate_events(config, days)
    write_events_csv(out / "events.csv", events, config_hash=config_hash)
    runtime_table_for(events).write_csv(out / "runtimes.csv", config_hash=config_hash)
    catalog = legs_from_events(events)
    catalog.write_csv(out / "legs.csv", config_hash=config_hash)
    journey = build_example_journey(catalog, config)
    journey.save(out / "journey.json", config_hash=config_hash)
    truth = {
        "transfer_truth": {
            k: getattr(config.transfer_truth, k)
            for k in (
                "intercept",
                "ptt_slope",
                "weekend",
                "arr_intercity_hour",
                "arr_short_train",
                "arr_intercity_winter",
                "dep_intercity_train",
                "prev_present",
                "prev_diff_slope",
            )
        },
        "delay_truth": {
            "weights": config.delay_truth.coefficients.weights.tolist(),
            "beta_mu": config.delay_truth.coefficients.beta_mu.tolist(),
            "beta_logsigma": config.delay_truth.coefficients.beta_logsigma.tolist(),
            "shift": config.delay_truth.shift,
            "misspecified": config.misspecified_delays,
        },
    }
    if config_hash:
        truth["config_hash"] = config_hash
    (out / "truth.json").write_text(json.dumps(truth, sort_keys=True), encoding="utf-8")
    return {
        "n_events": len(events),
        "n_legs": len(catalog),
        "files": ["events.csv", "runtimes.csv", "legs.csv", "journey.json", "truth.json"],
    }
