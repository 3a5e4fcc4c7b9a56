"""Recurring and one-shot schedules with explicit local-time semantics.

Firing times for daily and weekly recurrences are local wall-clock times in
a configured timezone. Around DST transitions the rules are: a wall time
that occurs twice fires on its first occurrence only, and a wall time that
is skipped fires at the transition instant itself (the first valid moment
after the gap).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date as Date
from datetime import datetime, time, timedelta, timezone
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

from .errors import ConfigError, InvalidInput, ParseError

EVERY = "every"
DAILY_AT = "daily_at"
WEEKLY_AT = "weekly_at"
ONCE_AT = "once_at"
KINDS = (EVERY, DAILY_AT, WEEKLY_AT, ONCE_AT)

_WEEKDAY_NAMES = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")
_TIME_RE = re.compile(r"^([01]\d|2[0-3]):([0-5]\d)$")

# upper bound on the calendar scan; generous even for weekly recurrences
_MAX_SCAN_DAYS = 400


def parse_local_time(text: str) -> time:
    m = _TIME_RE.match(text)
    if not m:
        raise InvalidInput(f"invalid local time {text!r}, expected HH:MM")
    return time(int(m.group(1)), int(m.group(2)))


def parse_weekday(value) -> int:
    if isinstance(value, bool):
        raise InvalidInput(f"invalid weekday {value!r}")
    if isinstance(value, int):
        if 0 <= value <= 6:
            return value
        raise InvalidInput(f"weekday index {value} out of range 0..6")
    name = str(value).strip().lower()[:3]
    if name in _WEEKDAY_NAMES:
        return _WEEKDAY_NAMES.index(name)
    raise InvalidInput(f"invalid weekday {value!r}")


def _zone(tz: str) -> ZoneInfo:
    try:
        return ZoneInfo(tz)
    except (ZoneInfoNotFoundError, KeyError, ValueError) as exc:
        raise ConfigError(f"unknown timezone {tz!r}") from exc


def truncate_to_hour(ts: float) -> float:
    return float(int(ts) // 3600 * 3600)


@dataclass(frozen=True)
class Recurrence:
    """One of: fixed interval, daily times, weekly times, or a single instant."""

    kind: str
    every_s: float = 0.0
    anchor: float = 0.0  # interval recurrences count from here
    times: tuple[str, ...] = ()
    entries: tuple[tuple[int, str], ...] = ()  # (weekday, HH:MM)
    at: float = 0.0
    weekdays_only: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown recurrence kind {self.kind!r}")
        if self.kind == EVERY and self.every_s <= 0.0:
            raise InvalidInput("interval must be positive")
        if self.kind == DAILY_AT:
            if not self.times:
                raise InvalidInput("daily recurrence needs at least one time")
            for t in self.times:
                parse_local_time(t)
        if self.kind == WEEKLY_AT:
            if not self.entries:
                raise InvalidInput("weekly recurrence needs at least one entry")
            for day, t in self.entries:
                parse_weekday(day)
                parse_local_time(t)

    def to_document(self) -> dict:
        if self.kind == EVERY:
            return {"kind": EVERY, "seconds": self.every_s, "anchor": self.anchor}
        if self.kind == DAILY_AT:
            return {"kind": DAILY_AT, "times": list(self.times), "weekdays_only": self.weekdays_only}
        if self.kind == WEEKLY_AT:
            return {"kind": WEEKLY_AT, "entries": [[d, t] for d, t in self.entries]}
        return {"kind": ONCE_AT, "at": self.at}

    @staticmethod
    def from_document(doc: dict) -> "Recurrence":
        try:
            kind = doc["kind"]
            if kind == EVERY:
                return Recurrence(EVERY, every_s=float(doc["seconds"]), anchor=float(doc.get("anchor", 0.0)))
            if kind == DAILY_AT:
                return Recurrence(
                    DAILY_AT,
                    times=tuple(str(t) for t in doc["times"]),
                    weekdays_only=bool(doc.get("weekdays_only", False)),
                )
            if kind == WEEKLY_AT:
                return Recurrence(
                    WEEKLY_AT,
                    entries=tuple((parse_weekday(d), str(t)) for d, t in doc["entries"]),
                )
            if kind == ONCE_AT:
                return Recurrence(ONCE_AT, at=float(doc["at"]))
            raise ParseError(f"unknown recurrence kind {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed recurrence document: {exc}") from exc


@dataclass(frozen=True)
class Schedule:
    id: str
    mission_id: str
    recurrence: Recurrence
    enabled: bool = True
    reorder_before_run: bool = False

    def __post_init__(self):
        if not self.id:
            raise InvalidInput("schedule id must be non-empty")
        if not self.mission_id:
            raise InvalidInput("schedule needs a mission id")

    def to_document(self) -> dict:
        return {
            "id": self.id,
            "mission": self.mission_id,
            "recurrence": self.recurrence.to_document(),
            "enabled": self.enabled,
            "reorder_before_run": self.reorder_before_run,
        }

    @staticmethod
    def from_document(doc: dict) -> "Schedule":
        try:
            return Schedule(
                id=str(doc["id"]),
                mission_id=str(doc["mission"]),
                recurrence=Recurrence.from_document(doc["recurrence"]),
                enabled=bool(doc.get("enabled", True)),
                reorder_before_run=bool(doc.get("reorder_before_run", False)),
            )
        except KeyError as exc:
            raise ParseError(f"schedule document missing {exc}") from exc


def _offset_at(ts: float, zone: ZoneInfo) -> timedelta:
    return datetime.fromtimestamp(ts, zone).utcoffset() or timedelta(0)


def resolve_local(day: Date, local: time, zone: ZoneInfo) -> float:
    """Unix instant for a local wall time, applying the DST rules above."""
    wall = datetime.combine(day, local, tzinfo=zone)
    off0 = wall.utcoffset()
    off1 = wall.replace(fold=1).utcoffset()
    if off0 == off1:
        return wall.timestamp()
    if off0 > off1:
        # clocks fell back: the wall time occurs twice; take the first pass
        return wall.timestamp()
    # clocks sprang forward: the wall time does not exist; fire at the
    # transition. Bisect for the first instant on the new offset.
    lo = wall.replace(fold=1).timestamp()
    hi = wall.timestamp()
    while hi - lo > 0.5:
        mid = (lo + hi) / 2.0
        if _offset_at(mid, zone) == off1:
            hi = mid
        else:
            lo = mid
    return float(round(hi))


def next_fire_time(recurrence: Recurrence, after: float, tz: str = "UTC") -> float | None:
    """Smallest firing instant strictly greater than ``after``, or None."""
    zone = _zone(tz)

    if recurrence.kind == ONCE_AT:
        return recurrence.at if recurrence.at > after else None

    if recurrence.kind == EVERY:
        step = recurrence.every_s
        anchor = recurrence.anchor
        if after < anchor:
            return anchor
        k = int((after - anchor) // step) + 1
        t = anchor + k * step
        while t <= after:  # float-precision backstop
            k += 1
            t = anchor + k * step
        return t

    local_after = datetime.fromtimestamp(after, zone)
    day = local_after.date()
    for _ in range(_MAX_SCAN_DAYS):
        if recurrence.kind == DAILY_AT:
            if not (recurrence.weekdays_only and day.weekday() >= 5):
                times = sorted(parse_local_time(t) for t in recurrence.times)
            else:
                times = []
        else:
            times = sorted(
                parse_local_time(t) for d, t in recurrence.entries if parse_weekday(d) == day.weekday()
            )
        for local in times:
            ts = resolve_local(day, local, zone)
            if ts > after:
                return ts
        day += timedelta(days=1)
    return None


def parse_timestamp(value) -> float:
    """Accept unix seconds or an ISO-8601 string (naive means UTC)."""
    if isinstance(value, bool):
        raise InvalidInput(f"invalid timestamp {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    try:
        dt = datetime.fromisoformat(str(value))
    except ValueError as exc:
        raise InvalidInput(f"invalid timestamp {value!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()
