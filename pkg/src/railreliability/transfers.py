"""Transfer records: candidate enumeration, reached labels, feature vectors.

A transfer is an (arrival event, departure event) pair at one station whose
planned transfer time (PTT) falls in the candidate window. The feature
layout here is the single source of truth for the transfer model's columns.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import SchemaError
from .events import (
    ClassificationRules,
    DEFAULT_RULES,
    TrainEvent,
    TrainType,
    _strip_comments,
    classify_train_type,
)
from .times import minutes_between

MIN_PTT_MINUTES = 3.0
MAX_PTT_MINUTES = 60.0
REACHED_GAP_MINUTES = 3.0

FEATURE_NAMES = (
    "ptt",
    "prev_ptt_diff",
    "weekend",
    "arr_intercity_hour",
    "arr_short_train",
    "arr_intercity_winter",
    "dep_intercity_train",
)

SHORT_TRAIN_MAX_HOURS = 2.0
WINTER_MONTHS = frozenset({12, 1, 2})


@dataclass(frozen=True)
class TransferFeatures:
    """Feature vector of the transfer model (one row). ``prev_ptt_diff`` is
    None on a first attempt and only set for alternatives after a miss."""

    ptt: float
    prev_ptt_diff: float | None
    weekend: int
    arr_intercity_hour: int
    arr_short_train: int
    arr_intercity_winter: int
    dep_intercity_train: int

    def to_array(self) -> np.ndarray:
        return np.array(
            [
                self.ptt,
                math.nan if self.prev_ptt_diff is None else self.prev_ptt_diff,
                self.weekend,
                self.arr_intercity_hour,
                self.arr_short_train,
                self.arr_intercity_winter,
                self.dep_intercity_train,
            ],
            dtype=float,
        )


@dataclass(frozen=True)
class TransferRecord:
    arrival: TrainEvent
    departure: TrainEvent
    ptt: float
    reached: bool | None  # None when either actual timestamp is missing
    features: TransferFeatures


def label_reached(arrival: TrainEvent, departure: TrainEvent, min_gap: float = REACHED_GAP_MINUTES) -> bool | None:
    """Reached iff the actual gap is at least ``min_gap`` minutes; None when
    an actual timestamp is missing (record unusable for training)."""
    if arrival.actual_arrival is None or departure.actual_departure is None:
        return None
    return minutes_between(arrival.actual_arrival, departure.actual_departure) >= min_gap


def build_features(
    arrival: TrainEvent,
    departure: TrainEvent,
    ptt: float,
    prev_ptt: float | None = None,
    rules: ClassificationRules = DEFAULT_RULES,
) -> TransferFeatures:
    arr_type = classify_train_type(arrival, rules)
    dep_type = classify_train_type(departure, rules)
    arr_ic = arr_type is TrainType.INTERCITY
    sched = arrival.scheduled_arrival
    if sched is None:
        raise SchemaError("arrival event has no scheduled arrival")
    short = (
        arrival.total_runtime is not None and arrival.total_runtime < SHORT_TRAIN_MAX_HOURS
    )
    return TransferFeatures(
        ptt=ptt,
        prev_ptt_diff=None if prev_ptt is None else ptt - prev_ptt,
        weekend=int(sched.is_weekend()),
        arr_intercity_hour=sched.hour_of_day() if arr_ic else 0,
        arr_short_train=int(short),
        arr_intercity_winter=int(arr_ic and sched.month() in WINTER_MONTHS),
        dep_intercity_train=int(dep_type is TrainType.INTERCITY),
    )


def enumerate_transfers(
    arrivals: Sequence[TrainEvent],
    departures: Sequence[TrainEvent],
    rules: ClassificationRules = DEFAULT_RULES,
    min_ptt: float = MIN_PTT_MINUTES,
    max_ptt: float = MAX_PTT_MINUTES,
) -> list[TransferRecord]:
    """All candidate transfers at one station, both window ends inclusive.

    The same physical train (identical train_id) is never a transfer to
    itself. First-attempt records carry prev_ptt_diff = None.
    """
    records = []
    for arr in arrivals:
        if arr.scheduled_arrival is None:
            continue
        for dep in departures:
            if dep.scheduled_departure is None or dep.train_id == arr.train_id:
                continue
            ptt = minutes_between(arr.scheduled_arrival, dep.scheduled_departure)
            if min_ptt <= ptt <= max_ptt:
                records.append(
                    TransferRecord(
                        arrival=arr,
                        departure=dep,
                        ptt=ptt,
                        reached=label_reached(arr, dep),
                        features=build_features(arr, dep, ptt, None, rules),
                    )
                )
    return records


def build_transfer_dataset(
    events: Sequence[TrainEvent],
    rules: ClassificationRules = DEFAULT_RULES,
    min_ptt: float = MIN_PTT_MINUTES,
    max_ptt: float = MAX_PTT_MINUTES,
) -> list[TransferRecord]:
    """Transfer records for every station in the event set.

    Besides the first-attempt records, each *missed* transfer is paired
    with every later in-window departure to produce conditional
    (alternative-choice) records whose prev_ptt_diff is the PTT gap to the
    missed preferred transfer: the rows that teach the model
    P(reach | previous transfer missed).
    """
    excluded = {
        e.key for e in events if classify_train_type(e, rules) is TrainType.EXCLUDED
    }
    by_station: dict = {}
    for e in events:
        if e.key in excluded:
            continue
        by_station.setdefault(e.station, []).append(e)

    records: list[TransferRecord] = []
    for station in sorted(by_station):
        station_events = by_station[station]
        arrivals = [e for e in station_events if e.scheduled_arrival is not None]
        departures = sorted(
            (e for e in station_events if e.scheduled_departure is not None),
            key=lambda e: (e.scheduled_departure.service_date, e.scheduled_departure.minutes, e.train_id),
        )
        base = enumerate_transfers(arrivals, departures, rules, min_ptt, max_ptt)
        records.extend(base)
        by_arrival: dict = {}
        for rec in base:
            by_arrival.setdefault(rec.arrival.key, []).append(rec)
        for recs in by_arrival.values():
            recs.sort(key=lambda r: r.ptt)
            for i, missed in enumerate(recs):
                if missed.reached is not False:
                    continue
                for alt in recs[i + 1 :]:
                    records.append(
                        TransferRecord(
                            arrival=alt.arrival,
                            departure=alt.departure,
                            ptt=alt.ptt,
                            reached=alt.reached,
                            features=build_features(
                                alt.arrival, alt.departure, alt.ptt, missed.ptt, rules
                            ),
                        )
                    )
    return records


def to_matrix(records: Iterable[TransferRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Labelled records as (X, y) with y = 1 for missed. Unlabelled records
    (missing actuals) are excluded from training."""
    rows = [r for r in records if r.reached is not None]
    X = np.array([r.features.to_array() for r in rows], dtype=float)
    y = np.array([0 if r.reached else 1 for r in rows], dtype=float)
    return X.reshape(len(rows), len(FEATURE_NAMES)), y


TRANSFER_COLUMNS = (
    "station",
    "arr_train_id",
    "arr_service_date",
    "dep_train_id",
    "dep_service_date",
    "label_missed",
) + FEATURE_NAMES


def write_transfers_csv(path: str | Path, records: Iterable[TransferRecord], config_hash: str | None = None):
    """NA (no previous transfer, unknown label) is the empty field."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        if config_hash:
            handle.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(handle)
        writer.writerow(TRANSFER_COLUMNS)
        for r in records:
            f = r.features
            writer.writerow(
                [
                    r.arrival.station,
                    r.arrival.train_id,
                    r.arrival.service_date.isoformat(),
                    r.departure.train_id,
                    r.departure.service_date.isoformat(),
                    "" if r.reached is None else int(not r.reached),
                    repr(f.ptt),
                    "" if f.prev_ptt_diff is None else repr(f.prev_ptt_diff),
                    f.weekend,
                    f.arr_intercity_hour,
                    f.arr_short_train,
                    f.arr_intercity_winter,
                    f.dep_intercity_train,
                ]
            )


def read_transfers_matrix(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix and miss labels from a transfer-dataset CSV,
    labelled rows only."""
    X_rows, y_rows = [], []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(_strip_comments(handle))
        if reader.fieldnames is None or not set(TRANSFER_COLUMNS).issubset(reader.fieldnames):
            raise SchemaError(f"transfer file needs columns {list(TRANSFER_COLUMNS)}")
        for row in reader:
            if row["label_missed"] == "":
                continue
            X_rows.append(
                [
                    float(row["ptt"]),
                    math.nan if row["prev_ptt_diff"] == "" else float(row["prev_ptt_diff"]),
                    float(row["weekend"]),
                    float(row["arr_intercity_hour"]),
                    float(row["arr_short_train"]),
                    float(row["arr_intercity_winter"]),
                    float(row["dep_intercity_train"]),
                ]
            )
            y_rows.append(float(row["label_missed"]))
    return np.array(X_rows, dtype=float).reshape(len(X_rows), len(FEATURE_NAMES)), np.array(y_rows)
