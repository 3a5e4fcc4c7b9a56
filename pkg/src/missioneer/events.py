"""Append-only state event stream with resumable reads.

Every observable state change in the system flows through one EventLog:
poses, localizer health, navigation progress, mission and task status,
schedule firings, monitor effects, map versions, and alerts. Consumers
resume from a sequence number, so a reconnecting client sees exactly the
events it missed (while they remain in the retention window).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import ProtocolError

KINDS = (
    "pose",
    "localizer",
    "navigation",
    "mission",
    "task",
    "schedule",
    "monitor",
    "map_version",
    "alert",
    "action_registry",
)


@dataclass(frozen=True)
class StateEvent:
    seq: int
    t: float
    kind: str
    payload: dict

    def to_document(self) -> dict:
        return {"seq": self.seq, "t": self.t, "kind": self.kind, "payload": self.payload}

    @staticmethod
    def from_document(doc: dict) -> "StateEvent":
        try:
            return StateEvent(
                seq=int(doc["seq"]),
                t=float(doc["t"]),
                kind=str(doc["kind"]),
                payload=dict(doc["payload"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed event document: {exc}") from exc


class EventLog:
    """In-memory event ring with synchronous fan-out.

    Listeners run on the publishing (timeline) thread and must not block;
    the network layer bridges to per-client queues. ``capacity`` bounds
    memory over month-long soaks; ``sink`` receives every event for
    durable logging when configured.
    """

    def __init__(self, time_fn, capacity: int = 200_000, sink=None):
        self._time_fn = time_fn
        self._buffer: deque[StateEvent] = deque(maxlen=capacity)
        self._listeners: list = []
        self._sink = sink
        self._next_seq = 1

    @property
    def last_seq(self) -> int:
        return self._next_seq - 1

    def publish(self, kind: str, payload: dict) -> StateEvent:
        if kind not in KINDS:
            raise ProtocolError(f"unknown event kind {kind!r}")
        event = StateEvent(self._next_seq, float(self._time_fn()), kind, payload)
        self._next_seq += 1
        self._buffer.append(event)
        if self._sink is not None:
            self._sink(event)
        for listener in tuple(self._listeners):
            listener(event)
        return event

    def add_listener(self, listener) -> None:
        self._listeners.append(listener)

    def remove_listener(self, listener) -> None:
        if listener in self._listeners:
            self._listeners.remove(listener)

    def events_after(self, seq: int) -> list[StateEvent]:
        """Buffered events with sequence number greater than ``seq``."""
        return [e for e in self._buffer if e.seq > seq]

    def snapshot(self) -> list[StateEvent]:
        return list(self._buffer)

    def of_kind(self, *kinds: str) -> list[StateEvent]:
        wanted = set(kinds)
        return [e for e in self._buffer if e.kind in wanted]
