"""Service-date aware timestamps.

Timetable data identifies a train run by its *service date*; times are
minutes since midnight of that date and may exceed 24:00 for runs crossing
midnight (GTFS convention, e.g. "25:10:00"). All delay arithmetic in the
package goes through :func:`minutes_between` so midnight crossings never
need special-casing downstream.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass

from .errors import SchemaError

_HMS = re.compile(r"^(\d{1,3}):(\d{2})(?::(\d{2}(?:\.\d+)?))?$")
_ISO = re.compile(r"^(\d{4})-(\d{2})-(\d{2})[T ](\d{2}):(\d{2})(?::(\d{2}(?:\.\d+)?))?$")


@dataclass(frozen=True)
class ServiceTime:
    """Minutes since midnight of a service date (may exceed 1440)."""

    service_date: dt.date
    minutes: float

    def wall_date(self) -> dt.date:
        """Calendar date the time actually falls on."""
        return self.service_date + dt.timedelta(days=int(self.minutes // 1440))

    def hour_of_day(self) -> int:
        return int(self.minutes // 60) % 24

    def minute_of_day(self) -> float:
        return self.minutes % 1440.0

    def month(self) -> int:
        return self.wall_date().month

    def is_weekend(self) -> bool:
        return self.wall_date().weekday() >= 5

    def add_minutes(self, delta: float) -> "ServiceTime":
        return ServiceTime(self.service_date, self.minutes + delta)


def minutes_between(start: ServiceTime, end: ServiceTime) -> float:
    """Signed minutes from ``start`` to ``end``."""
    day_shift = (end.service_date - start.service_date).days
    return day_shift * 1440.0 + (end.minutes - start.minutes)


def parse_service_date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError as exc:
        raise SchemaError(f"invalid service date {text!r}") from exc


def parse_time(text: str, service_date: dt.date) -> ServiceTime | None:
    """Parse an ISO 8601 timestamp or an HH:MM[:SS] clock time.

    Clock times are relative to ``service_date`` and may exceed 24 hours.
    Empty fields parse to None (absent timestamp).
    """
    text = text.strip()
    if not text:
        return None
    if text.startswith("-"):
        inner = parse_time(text[1:], service_date)
        assert inner is not None
        return ServiceTime(service_date, -inner.minutes)
    m = _ISO.match(text)
    if m:
        year, month, day, hh, mm = (int(m.group(i)) for i in range(1, 6))
        sec = float(m.group(6)) if m.group(6) else 0.0
        own_date = dt.date(year, month, day)
        day_shift = (own_date - service_date).days
        minutes = day_shift * 1440.0 + hh * 60.0 + mm + sec / 60.0
        return ServiceTime(service_date, minutes)
    m = _HMS.match(text)
    if m:
        hh, mm = int(m.group(1)), int(m.group(2))
        sec = float(m.group(3)) if m.group(3) else 0.0
        return ServiceTime(service_date, hh * 60.0 + mm + sec / 60.0)
    raise SchemaError(f"unparseable time {text!r}")


def format_time(t: ServiceTime | None) -> str:
    """Render as H:MM:SS[.mmm] relative to the service date (lossless to 1 ms)."""
    if t is None:
        return ""
    total_ms = round(t.minutes * 60_000)
    if total_ms < 0:
        return "-" + format_time(ServiceTime(t.service_date, -t.minutes))
    hh, rem = divmod(total_ms, 3_600_000)
    mm, rem = divmod(rem, 60_000)
    ss, ms = divmod(rem, 1000)
    base = f"{hh:02d}:{mm:02d}:{ss:02d}"
    return f"{base}.{ms:03d}" if ms else base
