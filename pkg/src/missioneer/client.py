"""Synchronous service client over the wire protocol.

One WebSocket carries requests, responses, and the event subscription, so a
client observes the same total order the service emitted. The client demuxes
inline: while waiting for a response it buffers any events that arrive.
"""

from __future__ import annotations

import itertools
import threading

from websockets.sync.client import connect as ws_connect

from . import protocol
from .errors import ProtocolError


class ServiceClient:
    def __init__(self, url: str, open_timeout: float = 10.0):
        self.url = url
        self.events: list = []
        self.notices: list[str] = []
        self.on_event = None
        self._ws = ws_connect(url, open_timeout=open_timeout, close_timeout=2.0)
        self._ids = itertools.count(1)
        self._lock = threading.Lock()

    def close(self) -> None:
        try:
            self._ws.close()
        except Exception:
            pass

    def __enter__(self) -> "ServiceClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- requests ------------------------------------------------------------

    def request(self, cmd: str, timeout: float | None = 60.0, **args):
        """Send one command and wait for its response; events buffer aside."""
        with self._lock:
            request_id = f"c{next(self._ids)}"
            self._ws.send(protocol.encode_request(protocol.Request(request_id, cmd, args)))
            while True:
                message = self._recv(timeout)
                if message["type"] == "event":
                    self._saw_event(message["event"])
                    continue
                if message["type"] == "notice":
                    self.notices.append(message["reason"])
                    continue
                if message["id"] != request_id:
                    raise ProtocolError(
                        f"response id {message['id']!r} does not match request {request_id!r}"
                    )
                if not message["ok"]:
                    raise protocol.error_from_document(message["error"])
                return message["result"]

    def subscribe(self, after_seq: int = 0, timeout: float | None = 60.0) -> int:
        """Start the event stream; returns the backlog size."""
        result = self.request("subscribe", timeout=timeout, after_seq=after_seq)
        return int(result["backlog"])

    def poll_events(self, timeout: float = 0.5, limit: int | None = None) -> list:
        """Drain pushed events, waiting up to `timeout` for the first one."""
        drained: list = []
        deadline_wait = timeout
        with self._lock:
            while limit is None or len(drained) < limit:
                try:
                    message = self._recv(deadline_wait)
                except TimeoutError:
                    break
                deadline_wait = 0.05
                if message["type"] == "event":
                    self._saw_event(message["event"])
                    drained.append(message["event"])
                elif message["type"] == "notice":
                    self.notices.append(message["reason"])
        return drained

    # -- internals ----------------------------------------------------------

    def _recv(self, timeout: float | None) -> dict:
        try:
            raw = self._ws.recv(timeout=timeout)
        except TimeoutError:
            raise
        return protocol.decode_message(raw)

    def _saw_event(self, event) -> None:
        self.events.append(event)
        if self.on_event is not None:
            self.on_event(event)


def remote_action_handler(url: str):
    """Adapt a remote endpoint speaking the wire protocol into a handler.

    The endpoint receives one `run_action` request carrying the validated
    parameters and the remaining time budget, and must answer with the
    result payload before that budget expires.
    """

    def handler(ctx) -> dict:
        remaining = max(ctx.deadline - ctx.timeline.now(), 0.1)
        with ws_connect(url, open_timeout=remaining, close_timeout=1.0) as ws:
            request = protocol.Request(
                "r1", "run_action", {"params": ctx.params, "budget_s": remaining}
            )
            ws.send(protocol.encode_request(request))
            while True:
                message = protocol.decode_message(ws.recv(timeout=remaining))
                if message["type"] != "response":
                    continue
                if not message["ok"]:
                    raise protocol.error_from_document(message["error"])
                result = message["result"]
                return result if isinstance(result, dict) else {"result": result}

    return handler
