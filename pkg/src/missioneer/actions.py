"""Typed, registrable robot actions and their cooperative executor.

An action is a named handler plus a parameter schema. Operators can register
new actions at runtime (in-process built-ins or remote endpoints); missions
reference them by name with concrete parameters and a timeout. Handlers
consume simulated or wall time only through the execution context, which is
what makes timeouts and cancellation deterministic under a virtual clock.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ActionCancelled,
    ActionTimedOut,
    InvalidParameters,
    InvalidRegistration,
    UnknownAction,
)
from .navigation import CancelToken

SUCCEEDED = "succeeded"
FAILED = "failed"
TIMED_OUT = "timed_out"
CANCELLED = "cancelled"

_TYPES = {
    "string": (str,),
    "number": (int, float),
    "integer": (int,),
    "boolean": (bool,),
    "object": (dict,),
    "array": (list,),
}

RESULT_GRACE_S = 1.0


def _type_ok(kind: str, value) -> bool:
    # bool is an int subclass; only "boolean" accepts it
    if isinstance(value, bool):
        return kind == "boolean"
    return isinstance(value, _TYPES[kind])


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: str = "number"
    required: bool = False
    default: object = None

    def __post_init__(self):
        if not self.name:
            raise InvalidRegistration("parameter name must be non-empty")
        if self.type not in _TYPES:
            raise InvalidRegistration(f"unknown parameter type {self.type!r}")
        if self.default is not None and not _type_ok(self.type, self.default):
            raise InvalidRegistration(
                f"default for {self.name!r} does not match type {self.type!r}"
            )

    def to_document(self) -> dict:
        doc: dict = {"name": self.name, "type": self.type, "required": self.required}
        if self.default is not None:
            doc["default"] = self.default
        return doc

    @staticmethod
    def from_document(doc: dict) -> "ParamSpec":
        try:
            return ParamSpec(
                name=str(doc["name"]),
                type=str(doc.get("type", "number")),
                required=bool(doc.get("required", False)),
                default=doc.get("default"),
            )
        except KeyError as exc:
            raise InvalidRegistration(f"parameter schema missing {exc}") from exc


@dataclass(frozen=True)
class ActionRegistration:
    """Schema and handler binding for one action name.

    ``handler`` is a descriptor: {"kind": "builtin", "name": …} resolves to a
    built-in, {"kind": "remote", "url": …} to an endpoint speaking the wire
    protocol. In-process callables can be attached through the registry for
    tests and embedders; those are not restorable from persistence.
    """

    name: str
    params: tuple[ParamSpec, ...] = ()
    handler: dict = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        if not self.name:
            raise InvalidRegistration("action name must be non-empty")
        seen = set()
        for p in self.params:
            if p.name in seen:
                raise InvalidRegistration(f"duplicate parameter {p.name!r}")
            seen.add(p.name)
        kind = self.handler.get("kind")
        if kind not in ("builtin", "remote", "inline"):
            raise InvalidRegistration(f"unknown handler kind {kind!r}")
        if kind == "remote" and not self.handler.get("url"):
            raise InvalidRegistration("remote handler needs a url")

    def validate(self, parameters: dict) -> dict:
        """Check ``parameters`` against the schema and fill in defaults."""
        known = {p.name: p for p in self.params}
        unknown = sorted(set(parameters) - set(known))
        if unknown:
            raise InvalidParameters(f"{self.name}: unknown parameters {unknown}")
        merged: dict = {}
        for p in self.params:
            if p.name in parameters:
                value = parameters[p.name]
                if not _type_ok(p.type, value):
                    raise InvalidParameters(
                        f"{self.name}: parameter {p.name!r} must be {p.type}"
                    )
                merged[p.name] = value
            elif p.required:
                raise InvalidParameters(f"{self.name}: missing required parameter {p.name!r}")
            elif p.default is not None:
                merged[p.name] = p.default
        return merged

    def to_document(self) -> dict:
        return {
            "name": self.name,
            "params": [p.to_document() for p in self.params],
            "handler": self.handler,
            "description": self.description,
        }

    @staticmethod
    def from_document(doc: dict) -> "ActionRegistration":
        try:
            return ActionRegistration(
                name=str(doc["name"]),
                params=tuple(ParamSpec.from_document(p) for p in doc.get("params", [])),
                handler=dict(doc.get("handler", {})),
                description=str(doc.get("description", "")),
            )
        except KeyError as exc:
            raise InvalidRegistration(f"registration missing {exc}") from exc


@dataclass(frozen=True)
class ActionSpec:
    """A concrete invocation: action name, parameters, and a time budget."""

    name: str
    parameters: dict = field(default_factory=dict)
    timeout_s: float = 60.0

    def __post_init__(self):
        if self.timeout_s <= 0.0:
            raise InvalidParameters("timeout_s must be positive")

    def to_document(self) -> dict:
        return {"name": self.name, "parameters": self.parameters, "timeout_s": self.timeout_s}

    @staticmethod
    def from_document(doc: dict) -> "ActionSpec":
        try:
            return ActionSpec(
                name=str(doc["name"]),
                parameters=dict(doc.get("parameters", {})),
                timeout_s=float(doc.get("timeout_s", 60.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidParameters(f"malformed action spec: {exc}") from exc


@dataclass(frozen=True)
class ActionResult:
    status: str
    payload: dict = field(default_factory=dict)
    duration: float = 0.0

    def to_document(self) -> dict:
        return {"status": self.status, "payload": self.payload, "duration": self.duration}


class ActionRegistry:
    """Name-unique action register; replacement is explicit and observable."""

    def __init__(self, events=None):
        self._entries: dict[str, ActionRegistration] = {}
        self._inline: dict[str, object] = {}
        self._events = events

    def register(self, registration: ActionRegistration, inline_handler=None) -> None:
        if registration.handler.get("kind") == "inline" and inline_handler is None:
            raise InvalidRegistration("inline registration needs a callable handler")
        replaced = registration.name in self._entries
        self._entries[registration.name] = registration
        if inline_handler is not None:
            self._inline[registration.name] = inline_handler
        elif registration.name in self._inline:
            del self._inline[registration.name]
        if self._events is not None:
            self._events.publish(
                "action_registry",
                {"event": "replaced" if replaced else "registered", "name": registration.name},
            )

    def get(self, name: str) -> ActionRegistration:
        try:
            return self._entries[name]
        except KeyError:
            raise UnknownAction(f"action {name!r} is not registered") from None

    def inline_handler(self, name: str):
        return self._inline.get(name)

    def list(self) -> list[ActionRegistration]:
        return [self._entries[name] for name in sorted(self._entries)]

    def to_document(self) -> dict:
        return {"actions": [r.to_document() for r in self.list()]}

    def load_document(self, doc: dict) -> None:
        for entry in doc.get("actions", []):
            reg = ActionRegistration.from_document(entry)
            self._entries[reg.name] = reg


class ActionContext:
    """Everything a handler may touch: parameters, robot, time, artifacts.

    ``sleep`` is the only sanctioned way to spend time. It advances the
    shared timeline in small steps and raises as soon as the budget runs out
    or a cancellation lands, so handlers stay responsive without threads.
    """

    SLEEP_STEP_S = 1.0

    def __init__(self, params, adapter, timeline, deadline, cancel, artifact_dir, rng):
        self.params = params
        self.adapter = adapter
        self.timeline = timeline
        self.deadline = deadline
        self.cancel = cancel
        self.artifact_dir = artifact_dir
        self.rng = rng

    def now(self) -> float:
        return self.timeline.now()

    @property
    def cancelled(self) -> bool:
        return self.cancel.cancelled

    def check(self) -> None:
        if self.cancel.cancelled:
            raise ActionCancelled(self.cancel.reason or "cancelled")
        if self.timeline.now() >= self.deadline:
            raise ActionTimedOut("action exceeded its timeout")

    def sleep(self, duration: float) -> None:
        end = self.timeline.now() + max(0.0, duration)
        while True:
            if self.cancel.cancelled:
                raise ActionCancelled(self.cancel.reason or "cancelled")
            now = self.timeline.now()
            if now >= end:
                return
            if now >= self.deadline:
                raise ActionTimedOut("action exceeded its timeout")
            step = min(self.SLEEP_STEP_S, end - now, self.deadline - now)
            self.timeline.advance_by(step)

    def artifact_path(self, filename: str) -> Path:
        self.artifact_dir.mkdir(parents=True, exist_ok=True)
        return self.artifact_dir / filename


# -- built-in handlers -------------------------------------------------------


def _noop(ctx: ActionContext) -> dict:
    return {}


def _wait(ctx: ActionContext) -> dict:
    ctx.sleep(ctx.params["duration_s"])
    return {"slept_s": ctx.params["duration_s"]}


def _capture_image(ctx: ActionContext) -> dict:
    ctx.sleep(1.0)
    name = "image-{camera}-p{pan:g}-t{tilt:g}-z{zoom:g}.pgm".format(**ctx.params)
    path = ctx.artifact_path(name)
    # deterministic 16x16 grey stub so tests can assert on bytes
    pixels = ctx.rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n16 16\n255\n")
        fh.write(pixels.tobytes())
    return {"file": str(path), **ctx.params}


def _read_temp_humidity(ctx: ActionContext) -> dict:
    ctx.sleep(1.0)
    return {
        "temperature_c": round(float(ctx.rng.uniform(12.0, 28.0)), 2),
        "humidity_pct": round(float(ctx.rng.uniform(25.0, 75.0)), 2),
    }


def _record_radiation(ctx: ActionContext) -> dict:
    duration = ctx.params["duration_s"]
    ctx.sleep(duration)
    counts = ctx.rng.poisson(5.0, size=64).astype(int)
    path = ctx.artifact_path("spectrum.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"duration_s": duration, "channels": counts.tolist()}, fh)
    return {"file": str(path), "total_counts": int(counts.sum()), "duration_s": duration}


def _dock(ctx: ActionContext) -> dict:
    ctx.adapter.dock()
    return {"docked": True}


def _undock(ctx: ActionContext) -> dict:
    ctx.adapter.undock()
    return {"docked": False}


_BUILTIN_HANDLERS = {
    "noop": _noop,
    "wait": _wait,
    "capture_image": _capture_image,
    "read_temp_humidity": _read_temp_humidity,
    "record_radiation": _record_radiation,
    "dock": _dock,
    "undock": _undock,
}


def builtin_registrations() -> list[ActionRegistration]:
    def builtin(name, *params, description=""):
        return ActionRegistration(
            name=name,
            params=params,
            handler={"kind": "builtin", "name": name},
            description=description,
        )

    return [
        builtin("noop", description="do nothing and succeed"),
        builtin(
            "wait",
            ParamSpec("duration_s", "number", required=True),
            description="hold position for a duration",
        ),
        builtin(
            "capture_image",
            ParamSpec("camera", "string", required=True),
            ParamSpec("pan", "number", default=0),
            ParamSpec("tilt", "number", default=0),
            ParamSpec("zoom", "number", default=1),
            description="point the camera and store a picture",
        ),
        builtin("read_temp_humidity", description="sample ambient temperature and humidity"),
        builtin(
            "record_radiation",
            ParamSpec("duration_s", "number", default=60),
            description="integrate a gamma spectrum over a duration",
        ),
        builtin("dock", description="latch onto the charging station"),
        builtin("undock", description="release from the charging station"),
    ]


class ActionExecutor:
    """Runs one action at a time against a registry, enforcing the budget."""

    def __init__(self, registry: ActionRegistry, timeline, adapter, artifact_root, seed: int = 0):
        self.registry = registry
        self.timeline = timeline
        self.adapter = adapter
        self.artifact_root = Path(artifact_root)
        self._seed = seed
        self._invocations = 0

    def _resolve(self, registration: ActionRegistration):
        kind = registration.handler.get("kind")
        if kind == "builtin":
            name = registration.handler.get("name")
            if name not in _BUILTIN_HANDLERS:
                raise UnknownAction(f"unknown builtin handler {name!r}")
            return _BUILTIN_HANDLERS[name]
        if kind == "inline":
            handler = self.registry.inline_handler(registration.name)
            if handler is None:
                raise UnknownAction(
                    f"inline handler for {registration.name!r} is not attached in this process"
                )
            return handler
        if kind == "remote":
            from .client import remote_action_handler

            return remote_action_handler(registration.handler["url"])
        raise UnknownAction(f"handler kind {kind!r} is not executable")

    def execute(
        self,
        spec: ActionSpec,
        mission_id: str = "adhoc",
        task_index: int = 0,
        cancel: CancelToken | None = None,
    ) -> ActionResult:
        registration = self.registry.get(spec.name)
        params = registration.validate(spec.parameters)
        handler = self._resolve(registration)
        cancel = cancel or CancelToken()
        self._invocations += 1
        rng = np.random.default_rng((self._seed, self._invocations))
        start = self.timeline.now()
        ctx = ActionContext(
            params=params,
            adapter=self.adapter,
            timeline=self.timeline,
            deadline=start + spec.timeout_s,
            cancel=cancel,
            artifact_dir=self.artifact_root / mission_id / str(task_index),
            rng=rng,
        )
        try:
            if cancel.cancelled:
                raise ActionCancelled(cancel.reason or "cancelled before start")
            payload = handler(ctx) or {}
            status = SUCCEEDED
        except ActionCancelled as exc:
            payload = {"reason": str(exc)}
            status = CANCELLED
        except ActionTimedOut:
            payload = {"timeout_s": spec.timeout_s}
            status = TIMED_OUT
        except Exception as exc:  # handler bug or adapter refusal
            payload = {"error": str(exc), "code": getattr(exc, "code", "error")}
            status = FAILED
        duration = min(self.timeline.now() - start, spec.timeout_s + RESULT_GRACE_S)
        return ActionResult(status=status, payload=payload, duration=duration)
