"""Durable state under one data directory; crash-safe by construction.

Documents are written atomically (temp file + rename). Mission records are
append-only JSON lines flushed to disk per record, so a crash can lose at
most the record of the mission in flight; an inflight marker turns that
loss into an explicit terminal record on the next startup.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .actions import ActionRegistration
from .errors import NotFound, ScheduledMissionInUse, StoreError
from .mission import FAILED, MissionRecord, PENDING, Mission, EXECUTING, NAVIGATING, PREEMPTED
from .schedule import Schedule
from .scheduler import InterventionRecord
from .topomap import TopologicalMap, map_from_document, map_to_document

SUBDIRS = ("maps", "missions", "schedules", "records", "logs", "artifacts", "config")


def atomic_write(path: Path, text: str, durable: bool = True) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.flush()
        if durable:
            os.fsync(fh.fileno())
    os.replace(tmp, path)


def atomic_write_json(path: Path, doc, durable: bool = True) -> None:
    atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n", durable=durable)


def _read_json(path: Path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise StoreError(f"cannot read {path}: {exc.strerror}", path=str(path)) from exc
    except json.JSONDecodeError as exc:
        raise StoreError(f"corrupt file {path}: {exc}", path=str(path)) from exc


@dataclass
class LoadedState:
    """Everything persisted, reconstructed at startup. All-or-nothing."""

    tmap: TopologicalMap | None
    missions: dict[str, Mission]
    schedules: dict[str, Schedule]
    registrations: list[ActionRegistration]
    records: list[MissionRecord]
    interventions: list[InterventionRecord]
    recovered_record: MissionRecord | None = None
    events: list = field(default_factory=list)


class DataStore:
    def __init__(self, root: Path | str):
        self.root = Path(root)
        for sub in SUBDIRS:
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    # -- paths ----------------------------------------------------------------

    @property
    def map_path(self) -> Path:
        return self.root / "maps" / "map.json"

    def mission_path(self, mission_id: str) -> Path:
        return self.root / "missions" / f"{mission_id}.json"

    def schedule_path(self, schedule_id: str) -> Path:
        return self.root / "schedules" / f"{schedule_id}.json"

    @property
    def records_path(self) -> Path:
        return self.root / "records" / "records.jsonl"

    @property
    def inflight_path(self) -> Path:
        return self.root / "records" / "inflight.json"

    @property
    def interventions_path(self) -> Path:
        return self.root / "logs" / "interventions.log"

    @property
    def registry_path(self) -> Path:
        return self.root / "config" / "action_registry.json"

    @property
    def artifacts_root(self) -> Path:
        return self.root / "artifacts"

    # -- map -------------------------------------------------------------------

    def save_map(self, tmap: TopologicalMap) -> None:
        atomic_write_json(self.map_path, map_to_document(tmap))

    def load_map(self) -> TopologicalMap | None:
        if not self.map_path.exists():
            return None
        try:
            return map_from_document(_read_json(self.map_path))
        except Exception as exc:
            raise StoreError(f"corrupt map {self.map_path}: {exc}", path=str(self.map_path)) from exc

    # -- missions ----------------------------------------------------------------

    def save_mission(self, mission: Mission) -> None:
        atomic_write_json(self.mission_path(mission.id), mission.to_document())

    def load_mission(self, mission_id: str) -> Mission:
        path = self.mission_path(mission_id)
        if not path.exists():
            raise NotFound(f"mission {mission_id!r} not found")
        return Mission.from_document(_read_json(path))

    def list_missions(self) -> list[Mission]:
        missions = []
        for path in sorted((self.root / "missions").glob("*.json")):
            try:
                missions.append(Mission.from_document(_read_json(path)))
            except Exception as exc:
                raise StoreError(f"corrupt mission {path}: {exc}", path=str(path)) from exc
        missions.sort(key=lambda m: (m.name, m.id))
        return missions

    def delete_mission(self, mission_id: str) -> None:
        path = self.mission_path(mission_id)
        if not path.exists():
            raise NotFound(f"mission {mission_id!r} not found")
        users = [s.id for s in self.list_schedules() if s.mission_id == mission_id]
        if users:
            raise ScheduledMissionInUse(
                f"mission {mission_id!r} is referenced by schedules {users}"
            )
        path.unlink()

    # -- schedules ----------------------------------------------------------------

    def save_schedule(self, schedule: Schedule) -> None:
        atomic_write_json(self.schedule_path(schedule.id), schedule.to_document())

    def load_schedule(self, schedule_id: str) -> Schedule:
        path = self.schedule_path(schedule_id)
        if not path.exists():
            raise NotFound(f"schedule {schedule_id!r} not found")
        return Schedule.from_document(_read_json(path))

    def list_schedules(self) -> list[Schedule]:
        schedules = []
        for path in sorted((self.root / "schedules").glob("*.json")):
            try:
                schedules.append(Schedule.from_document(_read_json(path)))
            except Exception as exc:
                raise StoreError(f"corrupt schedule {path}: {exc}", path=str(path)) from exc
        schedules.sort(key=lambda s: s.id)
        return schedules

    def delete_schedule(self, schedule_id: str) -> None:
        path = self.schedule_path(schedule_id)
        if not path.exists():
            raise NotFound(f"schedule {schedule_id!r} not found")
        path.unlink()

    # -- mission records -----------------------------------------------------------

    def append_record(self, record: MissionRecord) -> None:
        with open(self.records_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record.to_document(), sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def load_records(self) -> list[MissionRecord]:
        if not self.records_path.exists():
            return []
        records = []
        with open(self.records_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(MissionRecord.from_document(json.loads(line)))
                except Exception as exc:
                    raise StoreError(
                        f"corrupt record {self.records_path}:{lineno}: {exc}",
                        path=str(self.records_path),
                        line=lineno,
                    ) from exc
        records.sort(key=lambda r: r.started_at)
        return records

    # -- inflight marker -------------------------------------------------------------

    def write_inflight(self, doc: dict) -> None:
        # Marker updates are frequent; atomicity matters here, fsync latency
        # does not (a marker at most one transition stale recovers the same).
        atomic_write_json(self.inflight_path, doc, durable=False)

    def clear_inflight(self) -> None:
        if self.inflight_path.exists():
            self.inflight_path.unlink()

    def recover_inflight(self, now: float) -> MissionRecord | None:
        """Turn a leftover inflight marker into a terminal preempted record."""
        if not self.inflight_path.exists():
            return None
        doc = _read_json(self.inflight_path)
        try:
            statuses = [
                FAILED if s in (NAVIGATING, EXECUTING) else s
                for s in doc.get("task_statuses", [])
            ]
            record = MissionRecord(
                mission_id=str(doc["mission"]),
                name=str(doc.get("name", "")),
                origin=str(doc.get("origin", "operator")),
                started_at=float(doc["started_at"]),
                ended_at=now,
                task_statuses=statuses or [PENDING] * int(doc.get("tasks", 0)),
                distance_walked=float(doc.get("distance_walked", 0.0)),
                outcome=PREEMPTED,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise StoreError(
                f"corrupt inflight marker {self.inflight_path}: {exc}",
                path=str(self.inflight_path),
            ) from exc
        self.append_record(record)
        self.clear_inflight()
        return record

    # -- interventions ------------------------------------------------------------

    def append_intervention(self, record: InterventionRecord) -> None:
        with open(self.interventions_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record.to_document(), sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def load_interventions(self) -> list[InterventionRecord]:
        if not self.interventions_path.exists():
            return []
        records = []
        with open(self.interventions_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(InterventionRecord.from_document(json.loads(line)))
                except Exception as exc:
                    raise StoreError(
                        f"corrupt intervention {self.interventions_path}:{lineno}: {exc}",
                        path=str(self.interventions_path),
                        line=lineno,
                    ) from exc
        return records

    # -- action registry ------------------------------------------------------------

    def save_registry(self, doc: dict) -> None:
        atomic_write_json(self.registry_path, doc)

    def load_registry(self) -> list[ActionRegistration]:
        if not self.registry_path.exists():
            return []
        doc = _read_json(self.registry_path)
        try:
            return [ActionRegistration.from_document(d) for d in doc.get("actions", [])]
        except Exception as exc:
            raise StoreError(
                f"corrupt action registry {self.registry_path}: {exc}",
                path=str(self.registry_path),
            ) from exc

    # -- whole-state load ---------------------------------------------------------------

    def load_all(self, now: float) -> LoadedState:
        """Restore every entity, failing loudly on the first corrupt file."""
        tmap = self.load_map()
        missions = {m.id: m for m in self.list_missions()}
        schedules = {s.id: s for s in self.list_schedules()}
        registrations = self.load_registry()
        interventions = self.load_interventions()
        recovered = self.recover_inflight(now)
        records = self.load_records()
        return LoadedState(
            tmap=tmap,
            missions=missions,
            schedules=schedules,
            registrations=registrations,
            records=records,
            interventions=interventions,
            recovered_record=recovered,
        )
