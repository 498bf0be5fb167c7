"""Minimal GTFS-subset reader: trips + stop_times to a RuntimeTable.

Only the two derived durations the models need are extracted: cumulative
runtime from the origin to each stop and the trip's total runtime. This is
deliberately not a GTFS validator; hours past 24:00 are accepted, calendar
handling is reduced to an explicit ``service_date`` column on trips.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .errors import SchemaError
from .events import RuntimeTable, _strip_comments
from .times import parse_service_date, parse_time


def read_runtime_table_from_gtfs(trips_path: str | Path, stop_times_path: str | Path) -> RuntimeTable:
    trips = _read_trips(trips_path)
    stop_times = _read_stop_times(stop_times_path)

    table = RuntimeTable()
    for trip_id, stops in stop_times.items():
        if trip_id not in trips:
            continue
        train_id, service_date = trips[trip_id]
        stops.sort(key=lambda s: s[0])
        first_dep = stops[0][3] if stops[0][3] is not None else stops[0][2]
        last_arr = stops[-1][2] if stops[-1][2] is not None else stops[-1][3]
        if first_dep is None or last_arr is None:
            raise SchemaError(f"trip {trip_id!r} lacks a first departure or last arrival")
        total_h = (last_arr - first_dep) / 60.0
        for _, stop_id, arr, dep in stops:
            at_stop = arr if arr is not None else dep
            to_here_h = max(0.0, (at_stop - first_dep) / 60.0)
            table.add(train_id, service_date, stop_id, to_here_h, total_h)
    return table


def _read_trips(path: str | Path) -> dict:
    out = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(_strip_comments(handle))
        fields = set(reader.fieldnames or ())
        if "trip_id" not in fields or "service_date" not in fields:
            raise SchemaError("trips file needs trip_id and service_date columns")
        name_col = "trip_short_name" if "trip_short_name" in fields else "train_id"
        if name_col not in fields:
            raise SchemaError("trips file needs trip_short_name or train_id column")
        for row in reader:
            out[row["trip_id"]] = (row[name_col], parse_service_date(row["service_date"]))
    return out


def _read_stop_times(path: str | Path) -> dict:
    out: dict = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(_strip_comments(handle))
        required = {"trip_id", "stop_id", "arrival_time", "departure_time", "stop_sequence"}
        if not required.issubset(reader.fieldnames or ()):
            raise SchemaError(f"stop_times file needs columns {sorted(required)}")
        anchor = parse_service_date("1970-01-01")
        for row in reader:
            arr = parse_time(row["arrival_time"], anchor)
            dep = parse_time(row["departure_time"], anchor)
            out.setdefault(row["trip_id"], []).append(
                (
                    int(row["stop_sequence"]),
                    row["stop_id"],
                    None if arr is None else arr.minutes,
                    None if dep is None else dep.minutes,
                )
            )
    return out
