"""Train-event data model: ingestion, delays, train-type rules, filtering.

One :class:`TrainEvent` is one train calling at one station on one service
date. Events come in from a CSV export, get enriched with runtimes from a
:class:`RuntimeTable`, and pass through :func:`filter_events` before any
model sees them.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import DataIntegrityError, MissingDataError, SchemaError
from .times import ServiceTime, format_time, minutes_between, parse_service_date, parse_time


class TrainType(enum.Enum):
    INTERCITY = "intercity"
    REGIONAL = "regional"
    EXCLUDED = "excluded"


@dataclass(frozen=True)
class TrainEvent:
    """One train stopping at one station."""

    train_id: str
    operator: str
    train_category: str
    station: str
    service_date: dt.date
    scheduled_arrival: ServiceTime | None
    scheduled_departure: ServiceTime | None
    actual_arrival: ServiceTime | None
    actual_departure: ServiceTime | None
    origin: str
    destination: str
    runtime_to_here: float | None = None  # hours from origin to this station
    total_runtime: float | None = None  # hours from origin to final destination

    def __post_init__(self):
        if self.scheduled_arrival is None and self.scheduled_departure is None:
            raise ValueError("event needs a scheduled arrival or departure")
        if (
            self.scheduled_arrival is not None
            and self.scheduled_departure is not None
            and minutes_between(self.scheduled_arrival, self.scheduled_departure) < 0
        ):
            raise ValueError("scheduled departure precedes scheduled arrival")
        if self.runtime_to_here is not None and self.runtime_to_here < 0:
            raise ValueError("negative runtime")
        if (
            self.runtime_to_here is not None
            and self.total_runtime is not None
            and self.total_runtime < self.runtime_to_here
        ):
            raise ValueError("total runtime below runtime to here")

    @property
    def key(self) -> tuple[str, dt.date, str]:
        return (self.train_id, self.service_date, self.station)


@dataclass(frozen=True)
class ClassificationRules:
    """Operator/category rules deciding intercity vs regional vs excluded.

    The defaults encode the Swedish setup: IC and Snabbtåg runs of the
    state operator plus everything by the open-access long-distance
    operators count as intercity; night and special-service categories are
    excluded outright. The label lists are configuration, not code.
    """

    intercity_operator: str = "SJ"
    intercity_categories: frozenset = frozenset({"IC", "Snabbtåg"})
    intercity_operators: frozenset = frozenset({"Snälltåget", "VR"})
    excluded_categories: frozenset = frozenset({"Nattåg", "Museitåg", "Specialtåg"})

    @classmethod
    def from_json(cls, path: str | Path) -> "ClassificationRules":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {
            "intercity_operator",
            "intercity_categories",
            "intercity_operators",
            "excluded_categories",
        }
        unknown = set(raw) - known
        if unknown:
            raise SchemaError(f"unknown rule keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in raw.items():
            kwargs[key] = frozenset(value) if isinstance(value, list) else value
        return cls(**kwargs)

    def known_categories(self) -> frozenset:
        return self.intercity_categories | self.excluded_categories


DEFAULT_RULES = ClassificationRules()


def classify_train_type(event: TrainEvent, rules: ClassificationRules = DEFAULT_RULES) -> TrainType:
    """Classify an event's train. Exclusion wins over the intercity rules;
    unknown categories fall through to regional."""
    if event.train_category in rules.excluded_categories:
        return TrainType.EXCLUDED
    if event.operator == rules.intercity_operator and event.train_category in rules.intercity_categories:
        return TrainType.INTERCITY
    if event.operator in rules.intercity_operators:
        return TrainType.INTERCITY
    return TrainType.REGIONAL


def count_unknown_categories(events: Iterable[TrainEvent], rules: ClassificationRules = DEFAULT_RULES) -> int:
    """Events whose category matches no rule list (classified regional by default)."""
    known = rules.known_categories()
    return sum(
        1
        for e in events
        if e.train_category not in known
        and not (e.operator == rules.intercity_operator or e.operator in rules.intercity_operators)
    )


def compute_delay(scheduled: ServiceTime | None, actual: ServiceTime | None) -> float:
    """Signed delay in minutes, fractional minutes preserved."""
    if scheduled is None or actual is None:
        raise MissingDataError("delay needs both scheduled and actual timestamps")
    return minutes_between(scheduled, actual)


def arrival_delay(event: TrainEvent) -> float | None:
    if event.scheduled_arrival is None or event.actual_arrival is None:
        return None
    return minutes_between(event.scheduled_arrival, event.actual_arrival)


def departure_delay(event: TrainEvent) -> float | None:
    if event.scheduled_departure is None or event.actual_departure is None:
        return None
    return minutes_between(event.scheduled_departure, event.actual_departure)


@dataclass(frozen=True)
class FilterConfig:
    """Plausibility bounds on the signed delay, minutes."""

    min_delay: float = -60.0
    max_delay: float = 600.0


@dataclass
class FilterReport:
    n_input: int = 0
    n_kept: int = 0
    dropped: dict = None

    def __post_init__(self):
        if self.dropped is None:
            self.dropped = {"missing_runtime": 0, "missing_actuals": 0, "implausible_delay": 0}

    @property
    def n_dropped(self) -> int:
        return sum(self.dropped.values())

    def to_json_dict(self) -> dict:
        return {"n_input": self.n_input, "n_kept": self.n_kept, "dropped": dict(self.dropped)}


def _drop_reason(event: TrainEvent, config: FilterConfig) -> str | None:
    if event.runtime_to_here is None or event.total_runtime is None:
        return "missing_runtime"
    if event.scheduled_arrival is not None and event.actual_arrival is None:
        return "missing_actuals"
    if event.scheduled_departure is not None and event.actual_departure is None:
        return "missing_actuals"
    for delay in (arrival_delay(event), departure_delay(event)):
        if delay is not None and not (config.min_delay <= delay <= config.max_delay):
            return "implausible_delay"
    return None


def filter_events(
    events: Sequence[TrainEvent], config: FilterConfig = FilterConfig()
) -> tuple[list[TrainEvent], FilterReport]:
    """Drop events unusable for modeling; count the drops per reason.

    Idempotent: everything kept passes a second application unchanged.
    """
    report = FilterReport(n_input=len(events))
    kept: list[TrainEvent] = []
    for event in events:
        reason = _drop_reason(event, config)
        if reason is None:
            kept.append(event)
        else:
            report.dropped[reason] += 1
    report.n_kept = len(kept)
    return kept, report


class RuntimeTable:
    """(train_id, service_date, station) -> (runtime_to_here, total_runtime), hours."""

    def __init__(self, entries: dict | None = None):
        self._entries: dict = dict(entries or {})

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, train_id: str, service_date: dt.date, station: str):
        return self._entries.get((train_id, service_date, station))

    def add(self, train_id: str, service_date: dt.date, station: str, runtime_to_here: float, total_runtime: float):
        key = (train_id, service_date, station)
        value = (runtime_to_here, total_runtime)
        existing = self._entries.get(key)
        if existing is not None and existing != value:
            raise DataIntegrityError(
                f"conflicting runtime entries for {key}", key=[train_id, str(service_date), station]
            )
        self._entries[key] = value

    def items(self):
        return self._entries.items()

    @classmethod
    def from_csv(cls, path: str | Path) -> "RuntimeTable":
        table = cls()
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(_strip_comments(handle))
            required = {"train_id", "service_date", "station", "runtime_to_here_h", "total_runtime_h"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise SchemaError(f"runtime table needs columns {sorted(required)}")
            for row in reader:
                table.add(
                    row["train_id"],
                    parse_service_date(row["service_date"]),
                    row["station"],
                    float(row["runtime_to_here_h"]),
                    float(row["total_runtime_h"]),
                )
        return table

    def write_csv(self, path: str | Path, config_hash: str | None = None):
        with open(path, "w", newline="", encoding="utf-8") as handle:
            if config_hash:
                handle.write(f"# config_hash={config_hash}\n")
            writer = csv.writer(handle)
            writer.writerow(["train_id", "service_date", "station", "runtime_to_here_h", "total_runtime_h"])
            for (train_id, date, station), (to_here, total) in sorted(
                self._entries.items(), key=lambda kv: (kv[0][0], kv[0][1].isoformat(), kv[0][2])
            ):
                writer.writerow([train_id, date.isoformat(), station, repr(to_here), repr(total)])


def join_runtimes(events: Sequence[TrainEvent], table: RuntimeTable) -> list[TrainEvent]:
    """Enrich events with runtimes; unmatched events keep absent runtimes."""
    out = []
    for event in events:
        hit = table.lookup(event.train_id, event.service_date, event.station)
        if hit is None:
            out.append(event)
        else:
            out.append(replace(event, runtime_to_here=hit[0], total_runtime=hit[1]))
    return out


EVENT_COLUMNS = (
    "train_id",
    "operator",
    "category",
    "station",
    "service_date",
    "sched_arr",
    "sched_dep",
    "act_arr",
    "act_dep",
    "origin",
    "destination",
)
RUNTIME_COLUMNS = ("runtime_to_here_h", "total_runtime_h")


def _strip_comments(handle) -> Iterator[str]:
    return (line for line in handle if not line.startswith("#"))


def read_events_csv(path: str | Path) -> tuple[list[TrainEvent], int]:
    """Read events; rows that cannot be parsed are skipped and counted."""
    events: list[TrainEvent] = []
    n_bad = 0
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(_strip_comments(handle))
        if reader.fieldnames is None or not set(EVENT_COLUMNS).issubset(reader.fieldnames):
            raise SchemaError(f"events file needs columns {list(EVENT_COLUMNS)}")
        has_runtimes = set(RUNTIME_COLUMNS).issubset(reader.fieldnames)
        for row in reader:
            try:
                date = parse_service_date(row["service_date"])
                event = TrainEvent(
                    train_id=row["train_id"],
                    operator=row["operator"],
                    train_category=row["category"],
                    station=row["station"],
                    service_date=date,
                    scheduled_arrival=parse_time(row["sched_arr"], date),
                    scheduled_departure=parse_time(row["sched_dep"], date),
                    actual_arrival=parse_time(row["act_arr"], date),
                    actual_departure=parse_time(row["act_dep"], date),
                    origin=row["origin"],
                    destination=row["destination"],
                    runtime_to_here=_opt_float(row["runtime_to_here_h"]) if has_runtimes else None,
                    total_runtime=_opt_float(row["total_runtime_h"]) if has_runtimes else None,
                )
            except (SchemaError, ValueError, KeyError):
                n_bad += 1
                continue
            events.append(event)
    return events, n_bad


def _opt_float(text: str | None) -> float | None:
    if text is None or text.strip() == "":
        return None
    return float(text)


def write_events_csv(
    path: str | Path,
    events: Iterable[TrainEvent],
    config_hash: str | None = None,
    include_runtimes: bool = False,
):
    columns = EVENT_COLUMNS + (RUNTIME_COLUMNS if include_runtimes else ())
    with open(path, "w", newline="", encoding="utf-8") as handle:
        if config_hash:
            handle.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(handle)
        writer.writerow(columns)
        for e in events:
            row = [
                e.train_id,
                e.operator,
                e.train_category,
                e.station,
                e.service_date.isoformat(),
                format_time(e.scheduled_arrival),
                format_time(e.scheduled_departure),
                format_time(e.actual_arrival),
                format_time(e.actual_departure),
                e.origin,
                e.destination,
            ]
            if include_runtimes:
                row += [
                    "" if e.runtime_to_here is None else repr(e.runtime_to_here),
                    "" if e.total_runtime is None else repr(e.total_runtime),
                ]
            writer.writerow(row)
