"""Delay-model feature vectors built from events or journey legs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..events import ClassificationRules, DEFAULT_RULES, TrainType, arrival_delay, classify_train_type
from ..times import ServiceTime

DELAY_FEATURE_NAMES = ("total_runtime", "mid_day_afternoon_intercity", "evening_night_intercity")

_MID_DAY_START = 9 * 60.0
_MID_DAY_END = 18 * 60.0
_NIGHT_END = 5 * 60.0


@dataclass(frozen=True)
class DelayFeatures:
    """Covariates of the arrival-delay model for one train arrival.

    The two indicator features are mutually exclusive by construction (the
    9:00-18:00 and 18:00-05:00 windows do not overlap) and both zero for
    regional trains.
    """

    total_runtime: float  # hours, origin to final destination
    mid_day_afternoon_intercity: int
    evening_night_intercity: int

    def to_array(self) -> np.ndarray:
        return np.array(
            [self.total_runtime, self.mid_day_afternoon_intercity, self.evening_night_intercity],
            dtype=float,
        )


def time_window_flags(when: ServiceTime, intercity: bool) -> tuple[int, int]:
    minute = when.minute_of_day()
    mid = _MID_DAY_START <= minute < _MID_DAY_END
    evening = minute >= _MID_DAY_END or minute < _NIGHT_END
    return (int(intercity and mid), int(intercity and evening))


def make_delay_features(when: ServiceTime, intercity: bool, total_runtime: float) -> DelayFeatures:
    mid, evening = time_window_flags(when, intercity)
    return DelayFeatures(
        total_runtime=total_runtime,
        mid_day_afternoon_intercity=mid,
        evening_night_intercity=evening,
    )


def delay_features_from_event(event, rules: ClassificationRules = DEFAULT_RULES) -> DelayFeatures | None:
    """None when the event is no usable arrival (origin stop, excluded type,
    missing runtime)."""
    if event.scheduled_arrival is None or event.total_runtime is None:
        return None
    ttype = classify_train_type(event, rules)
    if ttype is TrainType.EXCLUDED:
        return None
    return make_delay_features(event.scheduled_arrival, ttype is TrainType.INTERCITY, event.total_runtime)


def delay_training_matrix(events, rules: ClassificationRules = DEFAULT_RULES) -> tuple[np.ndarray, np.ndarray]:
    """(X, delays) over events with an observable arrival delay."""
    rows, ys = [], []
    for event in events:
        delay = arrival_delay(event)
        if delay is None:
            continue
        feats = delay_features_from_event(event, rules)
        if feats is None:
            continue
        rows.append(feats.to_array())
        ys.append(delay)
    X = np.array(rows, dtype=float).reshape(len(rows), len(DELAY_FEATURE_NAMES))
    return X, np.array(ys, dtype=float)
