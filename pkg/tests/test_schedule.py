"""Recurrence parsing, local-time resolution, and DST-aware firing times."""

from datetime import datetime, time, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from missioneer.errors import ConfigError, InvalidInput, ParseError
from missioneer.schedule import (
    DAILY_AT,
    EVERY,
    ONCE_AT,
    WEEKLY_AT,
    Recurrence,
    Schedule,
    next_fire_time,
    parse_local_time,
    parse_timestamp,
    parse_weekday,
    truncate_to_hour,
)

from oracles import minute_scan_daily_fires


def utc(y, mo, d, h=0, mi=0, s=0):
    return datetime(y, mo, d, h, mi, s, tzinfo=timezone.utc).timestamp()


def collect_fires(rec, tz, start, end):
    out, t = [], start
    while True:
        t = next_fire_time(rec, t, tz)
        if t is None or t > end:
            return out
        out.append(t)


# -- parsing helpers ----------------------------------------------------------


def test_parse_local_time():
    assert parse_local_time("08:30") == time(8, 30)
    assert parse_local_time("23:59") == time(23, 59)
    for bad in ("8:30", "24:00", "12:60", "noon", ""):
        with pytest.raises(InvalidInput):
            parse_local_time(bad)


def test_parse_weekday():
    assert parse_weekday("mon") == 0
    assert parse_weekday("Tuesday") == 1
    assert parse_weekday("SUN") == 6
    assert parse_weekday(3) == 3
    for bad in (7, -1, True, "blursday"):
        with pytest.raises(InvalidInput):
            parse_weekday(bad)


def test_parse_timestamp_accepts_seconds_and_iso():
    assert parse_timestamp(1700000000) == 1700000000.0
    assert parse_timestamp("2023-07-18T11:00:00+00:00") == utc(2023, 7, 18, 11)
    # naive strings are UTC
    assert parse_timestamp("2023-07-18T11:00:00") == utc(2023, 7, 18, 11)
    for bad in (True, "yesterday"):
        with pytest.raises(InvalidInput):
            parse_timestamp(bad)


def test_truncate_to_hour():
    assert truncate_to_hour(3725.9) == 3600.0
    assert truncate_to_hour(3600.0) == 3600.0
    assert truncate_to_hour(0.0) == 0.0


# -- recurrence and schedule documents ----------------------------------------


def test_recurrence_validation():
    with pytest.raises(InvalidInput):
        Recurrence("hourly")
    with pytest.raises(InvalidInput):
        Recurrence(EVERY, every_s=0.0)
    with pytest.raises(InvalidInput):
        Recurrence(DAILY_AT, times=())
    with pytest.raises(InvalidInput):
        Recurrence(DAILY_AT, times=("25:00",))
    with pytest.raises(InvalidInput):
        Recurrence(WEEKLY_AT, entries=())
    with pytest.raises(InvalidInput):
        Recurrence(WEEKLY_AT, entries=((9, "10:00"),))


@pytest.mark.parametrize(
    "rec",
    [
        Recurrence(EVERY, every_s=3600.0, anchor=7200.0),
        Recurrence(DAILY_AT, times=("11:00", "15:00"), weekdays_only=True),
        Recurrence(WEEKLY_AT, entries=((0, "09:00"), (4, "17:30"))),
        Recurrence(ONCE_AT, at=123456.0),
    ],
)
def test_recurrence_document_round_trip(rec):
    assert Recurrence.from_document(rec.to_document()) == rec


def test_recurrence_from_document_rejects_garbage():
    with pytest.raises(ParseError):
        Recurrence.from_document({"kind": "lunar"})
    with pytest.raises(ParseError):
        Recurrence.from_document({"kind": EVERY})
    with pytest.raises(ParseError):
        Recurrence.from_document({"kind": DAILY_AT})


def test_schedule_document_round_trip():
    sched = Schedule(
        id="s1",
        mission_id="m1",
        recurrence=Recurrence(DAILY_AT, times=("11:00",), weekdays_only=True),
        enabled=False,
        reorder_before_run=True,
    )
    assert Schedule.from_document(sched.to_document()) == sched
    with pytest.raises(InvalidInput):
        Schedule(id="", mission_id="m1", recurrence=Recurrence(ONCE_AT, at=1.0))
    with pytest.raises(InvalidInput):
        Schedule(id="s", mission_id="", recurrence=Recurrence(ONCE_AT, at=1.0))
    with pytest.raises(ParseError):
        Schedule.from_document({"id": "s"})


# -- next_fire_time -----------------------------------------------------------


def test_once_at_fires_once_then_never():
    rec = Recurrence(ONCE_AT, at=1000.0)
    assert next_fire_time(rec, 0.0) == 1000.0
    assert next_fire_time(rec, 1000.0) is None
    assert next_fire_time(rec, 2000.0) is None


def test_every_counts_from_its_anchor():
    rec = Recurrence(EVERY, every_s=3600.0, anchor=truncate_to_hour(130.0))
    assert next_fire_time(rec, 10.0) == 3600.0
    assert next_fire_time(rec, 3600.0) == 7200.0  # strictly greater
    assert next_fire_time(rec, 3599.0) == 3600.0
    early = Recurrence(EVERY, every_s=60.0, anchor=500.0)
    assert next_fire_time(early, 0.0) == 500.0


def test_unknown_timezone_is_a_config_error():
    with pytest.raises(ConfigError):
        next_fire_time(Recurrence(DAILY_AT, times=("11:00",)), 0.0, tz="Mars/Olympus")


def test_weekday_slots_skip_the_weekend():
    rec = Recurrence(DAILY_AT, times=("11:00", "15:00"), weekdays_only=True)
    # 2023-07-21 is a Friday
    after_friday_afternoon = utc(2023, 7, 21, 15, 0)
    assert next_fire_time(rec, after_friday_afternoon) == utc(2023, 7, 24, 11, 0)
    midweek = utc(2023, 7, 18, 12, 0)
    assert next_fire_time(rec, midweek) == utc(2023, 7, 18, 15, 0)
    assert next_fire_time(rec, utc(2023, 7, 18, 15, 30)) == utc(2023, 7, 19, 11, 0)


def test_weekly_entries_fire_on_their_weekday():
    rec = Recurrence(WEEKLY_AT, entries=((2, "09:00"), (4, "17:30")))
    monday = utc(2023, 7, 17)
    assert next_fire_time(rec, monday) == utc(2023, 7, 19, 9, 0)
    assert next_fire_time(rec, utc(2023, 7, 19, 9, 0)) == utc(2023, 7, 21, 17, 30)
    assert next_fire_time(rec, utc(2023, 7, 21, 17, 30)) == utc(2023, 7, 26, 9, 0)


def test_spring_forward_skipped_time_fires_at_the_transition():
    # Europe/London 2024-03-31: 01:00 GMT jumps to 02:00 BST; 01:30 never happens
    rec = Recurrence(DAILY_AT, times=("01:30",))
    after = utc(2024, 3, 30, 1, 30)
    assert next_fire_time(rec, after, tz="Europe/London") == utc(2024, 3, 31, 1, 0)
    # the day after, 01:30 BST is 00:30 UTC
    assert next_fire_time(rec, utc(2024, 3, 31, 1, 0), tz="Europe/London") == utc(2024, 4, 1, 0, 30)


def test_fall_back_repeated_time_fires_on_first_pass_only():
    # Europe/London 2023-10-29: 02:00 BST falls back to 01:00 GMT;
    # 01:30 reads twice (00:30Z and 01:30Z); only the first fires
    rec = Recurrence(DAILY_AT, times=("01:30",))
    fire = next_fire_time(rec, utc(2023, 10, 29, 0, 0), tz="Europe/London")
    assert fire == utc(2023, 10, 29, 0, 30)
    assert next_fire_time(rec, fire, tz="Europe/London") == utc(2023, 10, 30, 1, 30)


@pytest.mark.parametrize("weekdays_only", [False, True])
@pytest.mark.parametrize(
    "window",
    [
        (utc(2023, 10, 15), utc(2023, 11, 15)),  # contains the fall-back
        (utc(2024, 3, 15), utc(2024, 4, 15)),  # contains the spring-forward
    ],
)
def test_daily_fires_match_minute_scan_oracle(weekdays_only, window):
    start, end = window
    times = ("01:30", "11:00")
    rec = Recurrence(DAILY_AT, times=times, weekdays_only=weekdays_only)
    got = collect_fires(rec, "Europe/London", start, end)
    expected = minute_scan_daily_fires(
        list(times), "Europe/London", start, end, weekdays_only=weekdays_only
    )
    assert got == expected


def test_utc_daily_fires_match_minute_scan_oracle():
    start, end = utc(2023, 7, 1), utc(2023, 8, 31)
    rec = Recurrence(DAILY_AT, times=("11:00", "15:00"), weekdays_only=True)
    got = collect_fires(rec, "UTC", start, end)
    expected = minute_scan_daily_fires(
        ["11:00", "15:00"], "UTC", start, end, weekdays_only=True
    )
    assert got == expected


@settings(max_examples=40, deadline=None)
@given(
    data=st.data(),
    tz=st.sampled_from(["UTC", "Europe/London", "America/New_York", "Australia/Sydney"]),
)
def test_fire_times_strictly_increase(data, tz):
    kind = data.draw(st.sampled_from([EVERY, DAILY_AT, WEEKLY_AT]))
    if kind == EVERY:
        rec = Recurrence(
            EVERY,
            every_s=data.draw(st.floats(1.0, 90000.0)),
            anchor=data.draw(st.floats(0.0, 1e9)),
        )
    elif kind == DAILY_AT:
        hours = data.draw(st.lists(st.integers(0, 23), min_size=1, max_size=3, unique=True))
        rec = Recurrence(
            DAILY_AT,
            times=tuple(f"{h:02d}:{data.draw(st.integers(0, 59)):02d}" for h in hours),
            weekdays_only=data.draw(st.booleans()),
        )
    else:
        entries = data.draw(
            st.lists(
                st.tuples(st.integers(0, 6), st.integers(0, 23)),
                min_size=1,
                max_size=3,
                unique=True,
            )
        )
        rec = Recurrence(WEEKLY_AT, entries=tuple((d, f"{h:02d}:00") for d, h in entries))
    t = data.draw(st.floats(0.0, 2e9))
    previous = t
    for _ in range(40):
        nxt = next_fire_time(rec, previous, tz)
        if nxt is None:
            break
        assert nxt > previous
        previous = nxt
