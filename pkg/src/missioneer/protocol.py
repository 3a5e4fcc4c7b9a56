"""Wire protocol: JSON documents over a duplex message stream.

One JSON document per message. Three message shapes share the stream:

    {"v": 1, "id": ..., "cmd": ..., "args": {...}}            request
    {"v": 1, "type": "response", "id": ..., "ok": ..., ...}   response
    {"v": 1, "type": "event", "event": {...}}                 pushed event

Responses carry ``result`` when ok and ``error: {code, message}`` when not.
Keeping requests, responses, and subscription traffic on one stream gives
every client a total order over what it observed.
"""

from __future__ import annotations

import inspect
import json
from dataclasses import dataclass, field

from . import errors as errors_mod
from .errors import MissioneerError, ProtocolError
from .events import StateEvent

PROTOCOL_VERSION = 1

COMMANDS = frozenset(
    {
        "ping",
        "get_state",
        "get_map",
        "apply_map_edit",
        "import_pose_graph",
        "plan_path",
        "get_policy",
        "navigate_to",
        "list_missions",
        "get_mission",
        "save_mission",
        "delete_mission",
        "execute_mission",
        "interrupt",
        "reorder_mission",
        "list_schedules",
        "get_schedule",
        "save_schedule",
        "delete_schedule",
        "set_schedule_enabled",
        "list_actions",
        "register_action",
        "log_intervention",
        "list_interventions",
        "list_records",
        "metrics",
        "subscribe",
    }
)

_ERROR_CLASSES = {
    cls.code: cls
    for _, cls in inspect.getmembers(errors_mod, inspect.isclass)
    if issubclass(cls, MissioneerError)
}


@dataclass(frozen=True)
class Request:
    id: str
    cmd: str
    args: dict = field(default_factory=dict)


def encode_request(request: Request) -> str:
    return json.dumps(
        {"v": PROTOCOL_VERSION, "id": request.id, "cmd": request.cmd, "args": request.args},
        sort_keys=True,
    )


def decode_request(text: str) -> Request:
    doc = _decode_document(text)
    if "cmd" not in doc:
        raise ProtocolError("request is missing 'cmd'")
    if "id" not in doc:
        raise ProtocolError("request is missing 'id'")
    cmd = doc["cmd"]
    if not isinstance(cmd, str):
        raise ProtocolError("request 'cmd' must be a string")
    args = doc.get("args", {})
    if not isinstance(args, dict):
        raise ProtocolError("request 'args' must be an object")
    return Request(id=str(doc["id"]), cmd=cmd, args=args)


def encode_response(request_id: str, result) -> str:
    return json.dumps(
        {
            "v": PROTOCOL_VERSION,
            "type": "response",
            "id": request_id,
            "ok": True,
            "result": result,
        },
        sort_keys=True,
    )


def encode_error(request_id: str, code: str, message: str) -> str:
    return json.dumps(
        {
            "v": PROTOCOL_VERSION,
            "type": "response",
            "id": request_id,
            "ok": False,
            "error": {"code": code, "message": message},
        },
        sort_keys=True,
    )


def encode_event(event: StateEvent) -> str:
    return json.dumps(
        {"v": PROTOCOL_VERSION, "type": "event", "event": event.to_document()}, sort_keys=True
    )


def encode_notice(reason: str) -> str:
    """Out-of-band server notice, e.g. before a forced disconnect."""
    return json.dumps({"v": PROTOCOL_VERSION, "type": "notice", "reason": reason}, sort_keys=True)


def decode_message(text: str) -> dict:
    """Parse a server-to-client message into {"type": ..., ...}."""
    doc = _decode_document(text)
    kind = doc.get("type")
    if kind == "response":
        if "id" not in doc or "ok" not in doc:
            raise ProtocolError("response is missing 'id' or 'ok'")
        if doc["ok"] and "result" not in doc:
            raise ProtocolError("ok response is missing 'result'")
        if not doc["ok"]:
            err = doc.get("error")
            if not isinstance(err, dict) or "code" not in err or "message" not in err:
                raise ProtocolError("error response needs error.code and error.message")
        return doc
    if kind == "event":
        event = doc.get("event")
        if not isinstance(event, dict):
            raise ProtocolError("event message is missing 'event'")
        return {"type": "event", "event": StateEvent.from_document(event)}
    if kind == "notice":
        return {"type": "notice", "reason": doc.get("reason", "")}
    raise ProtocolError(f"unknown message type {kind!r}")


def error_from_document(doc: dict) -> MissioneerError:
    """Rebuild the service-side exception from an error response body."""
    cls = _ERROR_CLASSES.get(doc.get("code", ""), MissioneerError)
    try:
        return cls(doc.get("message", ""))
    except TypeError:  # classes with extra required args keep the base shape
        return MissioneerError(doc.get("message", ""))


def _decode_document(text: str) -> dict:
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise ProtocolError(f"malformed message: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProtocolError("message must be a JSON object")
    if doc.get("v") != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version {doc.get('v')!r}")
    return doc
