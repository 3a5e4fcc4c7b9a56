"""Durable state: atomic writes, round trips, corruption, crash recovery."""

import json

import pytest

from missioneer.actions import ActionRegistration, ActionSpec, ParamSpec
from missioneer.errors import NotFound, ScheduledMissionInUse, StoreError
from missioneer.mission import (
    EXECUTING,
    FAILED,
    PENDING,
    PREEMPTED,
    SUCCEEDED,
    Mission,
    MissionRecord,
    Task,
)
from missioneer.schedule import DAILY_AT, ONCE_AT, Recurrence, Schedule
from missioneer.scheduler import MINOR, SERIOUS, InterventionRecord
from missioneer.store import DataStore, atomic_write, atomic_write_json
from missioneer.topomap import map_to_document

from conftest import two_route_map


@pytest.fixture
def store(tmp_path):
    return DataStore(tmp_path / "data")


def mission(mid="m1", name="rounds"):
    return Mission(id=mid, name=name, tasks=(Task(node="a", action=ActionSpec("noop")),))


def record(mid="m1", started=10.0):
    return MissionRecord(
        mission_id=mid,
        name="rounds",
        origin="operator",
        started_at=started,
        ended_at=started + 5.0,
        task_statuses=[SUCCEEDED],
        distance_walked=3.0,
        outcome="completed",
    )


# -- atomic writes -------------------------------------------------------------


def test_atomic_write_replaces_and_leaves_no_temp(tmp_path):
    target = tmp_path / "doc.json"
    atomic_write(target, "first")
    atomic_write(target, "second")
    assert target.read_text() == "second"
    assert list(tmp_path.iterdir()) == [target]


def test_atomic_write_json_is_stable(tmp_path):
    target = tmp_path / "doc.json"
    atomic_write_json(target, {"b": 1, "a": 2})
    atomic_write_json(target, {"a": 2, "b": 1})
    text = target.read_text()
    assert json.loads(text) == {"a": 2, "b": 1}
    assert text.index('"a"') < text.index('"b"')  # sorted keys, diff-friendly


# -- maps ------------------------------------------------------------------------


def test_map_round_trip(store):
    assert store.load_map() is None
    tmap = two_route_map()
    store.save_map(tmap)
    loaded = store.load_map()
    assert map_to_document(loaded) == map_to_document(tmap)


def test_corrupt_map_names_the_file(store):
    store.map_path.write_text("{ not json")
    with pytest.raises(StoreError) as err:
        store.load_map()
    assert err.value.details["path"] == str(store.map_path)
    assert str(store.map_path) in str(err.value)


# -- missions ----------------------------------------------------------------------


def test_mission_round_trip_and_listing(store):
    store.save_mission(mission("m2", name="zeta"))
    store.save_mission(mission("m1", name="alpha"))
    store.save_mission(mission("m3", name="alpha"))
    assert store.load_mission("m1") == mission("m1", name="alpha")
    assert [m.id for m in store.list_missions()] == ["m1", "m3", "m2"]
    with pytest.raises(NotFound):
        store.load_mission("ghost")


def test_delete_mission(store):
    store.save_mission(mission())
    store.delete_mission("m1")
    with pytest.raises(NotFound):
        store.load_mission("m1")
    with pytest.raises(NotFound):
        store.delete_mission("m1")


def test_scheduled_mission_cannot_be_deleted(store):
    store.save_mission(mission())
    store.save_schedule(
        Schedule(id="s1", mission_id="m1", recurrence=Recurrence(ONCE_AT, at=5.0))
    )
    with pytest.raises(ScheduledMissionInUse) as err:
        store.delete_mission("m1")
    assert "s1" in str(err.value)
    store.delete_schedule("s1")
    store.delete_mission("m1")


def test_corrupt_mission_fails_the_listing(store):
    store.save_mission(mission())
    bad = store.mission_path("broken")
    bad.write_text('{"id": "broken", "tasks": "zzz"}')
    with pytest.raises(StoreError) as err:
        store.list_missions()
    assert err.value.details["path"] == str(bad)


# -- schedules -----------------------------------------------------------------------


def test_schedule_round_trip_and_listing(store):
    s1 = Schedule(
        id="b", mission_id="m1", recurrence=Recurrence(DAILY_AT, times=("11:00",))
    )
    s2 = Schedule(id="a", mission_id="m2", recurrence=Recurrence(ONCE_AT, at=1.0))
    store.save_schedule(s1)
    store.save_schedule(s2)
    assert store.load_schedule("b") == s1
    assert [s.id for s in store.list_schedules()] == ["a", "b"]
    store.delete_schedule("a")
    with pytest.raises(NotFound):
        store.load_schedule("a")
    with pytest.raises(NotFound):
        store.delete_schedule("a")


# -- mission records --------------------------------------------------------------------


def test_records_append_and_load_sorted(store):
    store.append_record(record("m2", started=20.0))
    store.append_record(record("m1", started=10.0))
    loaded = store.load_records()
    assert [r.mission_id for r in loaded] == ["m1", "m2"]
    assert loaded[0] == record("m1", started=10.0)


def test_blank_lines_are_tolerated_but_corrupt_lines_are_not(store):
    store.append_record(record())
    with open(store.records_path, "a") as fh:
        fh.write("\n")
    assert len(store.load_records()) == 1
    with open(store.records_path, "a") as fh:
        fh.write("{oops\n")
    with pytest.raises(StoreError) as err:
        store.load_records()
    assert err.value.details["line"] == 3


# -- inflight marker -----------------------------------------------------------------------


def test_recover_inflight_writes_a_terminal_preempted_record(store):
    store.append_record(record("m0", started=1.0))
    store.write_inflight(
        {
            "mission": "m9",
            "name": "night shift",
            "origin": "schedule",
            "started_at": 50.0,
            "task_statuses": [SUCCEEDED, EXECUTING, PENDING],
            "distance_walked": 4.5,
        }
    )
    recovered = store.recover_inflight(now=60.0)
    assert recovered.outcome == PREEMPTED
    assert recovered.task_statuses == [SUCCEEDED, FAILED, PENDING]
    assert recovered.ended_at == 60.0
    assert recovered.distance_walked == 4.5
    assert store.inflight_path.exists() is False
    # the log now ends with the recovered record and survives a reload
    loaded = store.load_records()
    assert [r.mission_id for r in loaded] == ["m0", "m9"]
    assert loaded[-1] == recovered
    assert store.recover_inflight(now=70.0) is None


def test_recover_inflight_without_statuses_uses_task_count(store):
    store.write_inflight({"mission": "m1", "started_at": 5.0, "tasks": 2})
    recovered = store.recover_inflight(now=9.0)
    assert recovered.task_statuses == [PENDING, PENDING]


def test_corrupt_inflight_marker_is_loud(store):
    store.write_inflight({"started_at": "soon"})
    with pytest.raises(StoreError) as err:
        store.recover_inflight(now=1.0)
    assert err.value.details["path"] == str(store.inflight_path)


# -- interventions and registry ----------------------------------------------------------------


def test_interventions_round_trip(store):
    a = InterventionRecord(5.0, SERIOUS, description="reset e-stop")
    b = InterventionRecord(9.0, MINOR, operator="ops2")
    store.append_intervention(a)
    store.append_intervention(b)
    assert store.load_interventions() == [a, b]
    with open(store.interventions_path, "a") as fh:
        fh.write('{"t": "never"}\n')
    with pytest.raises(StoreError):
        store.load_interventions()


def test_registry_round_trip(store):
    assert store.load_registry() == []
    reg = ActionRegistration(
        name="probe",
        params=(ParamSpec("channel", type="integer", required=True),),
        handler={"kind": "remote", "url": "tcp://sensor:9000"},
    )
    store.save_registry({"actions": [reg.to_document()]})
    assert store.load_registry() == [reg]
    store.registry_path.write_text('{"actions": [{"name": 3}]}')
    with pytest.raises(StoreError):
        store.load_registry()


# -- whole-state load ----------------------------------------------------------------------------


def test_load_all_restores_every_entity(store):
    tmap = two_route_map()
    store.save_map(tmap)
    store.save_mission(mission())
    store.save_schedule(
        Schedule(id="s1", mission_id="m1", recurrence=Recurrence(ONCE_AT, at=5.0))
    )
    store.append_record(record())
    store.append_intervention(InterventionRecord(2.0, MINOR))
    store.write_inflight({"mission": "m1", "started_at": 40.0, "tasks": 1})

    state = store.load_all(now=99.0)
    assert map_to_document(state.tmap) == map_to_document(tmap)
    assert set(state.missions) == {"m1"}
    assert set(state.schedules) == {"s1"}
    assert len(state.interventions) == 1
    assert state.recovered_record is not None
    assert state.recovered_record.outcome == PREEMPTED
    # prefix consistency: prior records unchanged, recovered one appended last
    assert [r.mission_id for r in state.records] == ["m1", "m1"]
    assert state.records[-1] == state.recovered_record

    # a second boot sees the same records and nothing left to recover
    rebooted = DataStore(store.root).load_all(now=120.0)
    assert rebooted.recovered_record is None
    assert rebooted.records == state.records
