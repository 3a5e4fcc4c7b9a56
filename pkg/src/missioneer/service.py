"""Operator-facing service: commands in, state events out, over WebSocket.

Every connection shares one duplex stream for requests, responses, and the
event subscription, so each client observes a total order. All mutations are
submitted to the core timeline and run there one at a time; connection
threads only parse, enqueue, and write.

Event fan-out never blocks the core: each connection has a bounded outbox
drained by a writer thread, and a client that falls too far behind is sent
an overflow notice and disconnected.
"""

from __future__ import annotations

import queue
import threading

from websockets.sync.server import serve as ws_serve

from . import protocol
from .actions import ActionRegistration
from .errors import MissioneerError, NotFound, ProtocolError
from .mission import Mission, reorder_tsp
from .navigation import compute_policy, plan_path
from .schedule import Schedule
from .scheduler import InterventionRecord
from .topomap import MapEdit, build_from_pose_graph, map_to_document

OUTBOX_LIMIT = 4096

_OK = {"ok": True}


class _Connection:
    """Per-client send side: bounded outbox plus a writer thread."""

    def __init__(self, websocket):
        self.websocket = websocket
        self.outbox: queue.Queue = queue.Queue(maxsize=OUTBOX_LIMIT)
        self.overflowed = threading.Event()
        self.closed = threading.Event()
        self.listener = None
        self.writer = threading.Thread(target=self._write_loop, daemon=True)
        self.writer.start()

    def send(self, text: str) -> None:
        if self.closed.is_set() or self.overflowed.is_set():
            return
        try:
            self.outbox.put_nowait(text)
        except queue.Full:
            self.overflowed.set()

    def _write_loop(self) -> None:
        while not self.closed.is_set():
            if self.overflowed.is_set() and self.outbox.empty():
                try:
                    self.websocket.send(protocol.encode_notice("event buffer overflow"))
                finally:
                    self.close()
                return
            try:
                text = self.outbox.get(timeout=0.1)
            except queue.Empty:
                continue
            try:
                self.websocket.send(text)
            except Exception:
                self.close()
                return

    def close(self) -> None:
        self.closed.set()
        try:
            self.websocket.close()
        except Exception:
            pass


class OpsService:
    """WebSocket front end over an AutonomyCore."""

    def __init__(self, core, host: str = "127.0.0.1", port: int = 0):
        self.core = core
        self.host = host
        self.port = port
        self._server = None
        self._thread = None
        self._connections: set[_Connection] = set()
        self._lock = threading.Lock()

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        self._server = ws_serve(self._handle, self.host, self.port)
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        with self._lock:
            connections = list(self._connections)
        for conn in connections:
            self._detach(conn)
            conn.close()
        if self._server is not None:
            self._server.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    @property
    def url(self) -> str:
        return f"ws://{self.host}:{self.port}"

    # -- connection handling -------------------------------------------------

    def _handle(self, websocket) -> None:
        conn = _Connection(websocket)
        with self._lock:
            self._connections.add(conn)
        seen_ids: set[str] = set()
        try:
            for message in websocket:
                try:
                    request = protocol.decode_request(message)
                except ProtocolError as exc:
                    conn.send(protocol.encode_error("", exc.code, str(exc)))
                    continue
                if request.id in seen_ids:
                    conn.send(
                        protocol.encode_error(
                            request.id, "ProtocolError", f"duplicate request id {request.id!r}"
                        )
                    )
                    continue
                seen_ids.add(request.id)
                self._dispatch(conn, request)
        except Exception:
            pass
        finally:
            self._detach(conn)
            conn.close()
            with self._lock:
                self._connections.discard(conn)

    def _detach(self, conn: _Connection) -> None:
        if conn.listener is not None:
            self.core.events.remove_listener(conn.listener)
            conn.listener = None

    # -- dispatch ----------------------------------------------------------

    def _dispatch(self, conn: _Connection, request) -> None:
        if request.cmd not in protocol.COMMANDS:
            conn.send(
                protocol.encode_error(
                    request.id, "ProtocolError", f"unknown command {request.cmd!r}"
                )
            )
            return
        try:
            if request.cmd == "subscribe":
                self._on_core(lambda: self._subscribe(conn, request))
                return
            result = self._on_core(lambda: self._execute(conn, request))
            conn.send(protocol.encode_response(request.id, result))
        except MissioneerError as exc:
            conn.send(protocol.encode_error(request.id, exc.code, str(exc)))
        except Exception as exc:  # pragma: no cover - defensive
            conn.send(protocol.encode_error(request.id, "Error", str(exc)))

    def _on_core(self, fn):
        """Run fn on the core timeline thread and wait for its result."""
        done = threading.Event()
        box: dict = {}

        def run() -> None:
            try:
                box["result"] = fn()
            except BaseException as exc:
                box["error"] = exc
            finally:
                done.set()

        self.core.timeline.submit(run)
        done.wait()
        if "error" in box:
            raise box["error"]
        return box["result"]

    def _subscribe(self, conn: _Connection, request) -> None:
        """Backlog then live tail, atomically ordered against publishes."""
        after = int(request.args.get("after_seq", 0))
        backlog = self.core.events.events_after(after)
        conn.send(protocol.encode_response(request.id, {"backlog": len(backlog)}))
        for event in backlog:
            conn.send(protocol.encode_event(event))
        if conn.listener is None:

            def listener(event) -> None:
                conn.send(protocol.encode_event(event))

            conn.listener = listener
            self.core.events.add_listener(listener)

    def _execute(self, conn: _Connection, request):
        core = self.core
        args = request.args
        cmd = request.cmd

        if cmd == "ping":
            return {"pong": True, "now": core.timeline.now()}
        if cmd == "get_state":
            return core.state_summary()
        if cmd == "get_map":
            return map_to_document(core.tmap)
        if cmd == "apply_map_edit":
            tmap = core.apply_map_edit(
                MapEdit.from_document(args["edit"]), int(args["expected_version"])
            )
            return {"version": tmap.version}
        if cmd == "import_pose_graph":
            tmap = build_from_pose_graph(args["poses"], float(args.get("threshold", 1.5)))
            core.set_map(tmap)
            return {"version": tmap.version, "nodes": len(tmap.nodes), "edges": len(tmap.edges)}
        if cmd == "plan_path":
            route = plan_path(core.tmap, args["start"], args["goal"])
            return {
                "start": route.start,
                "goal": route.goal,
                "hops": [list(e.key()) for e in route.hops],
                "total_cost": route.total_cost,
            }
        if cmd == "get_policy":
            policy = compute_policy(core.tmap, args["goal"])
            return {
                "goal": policy.goal,
                "next_hop": {
                    node: (list(edge.key()) if edge is not None else None)
                    for node, edge in policy.next_hop.items()
                },
                "cost_to_goal": dict(policy.cost_to_goal),
            }
        if cmd == "navigate_to":
            return core.navigate(args["goal"])

        if cmd == "list_missions":
            ordered = sorted(core.missions.values(), key=lambda m: (m.name, m.id))
            return {"missions": [m.to_document() for m in ordered]}
        if cmd == "get_mission":
            mission = core.missions.get(args["id"])
            if mission is None:
                raise NotFound(f"mission {args['id']!r} not found")
            return mission.to_document()
        if cmd == "save_mission":
            mission = Mission.from_document(args["mission"])
            core.save_mission(mission)
            return {"saved": mission.id}
        if cmd == "delete_mission":
            core.delete_mission(args["id"])
            return dict(_OK)
        if cmd == "execute_mission":
            record = core.execute_mission_id(args["id"], origin=args.get("origin", "operator"))
            return record.to_document()
        if cmd == "interrupt":
            return core.interrupt(args.get("reason", "operator interrupt"))
        if cmd == "reorder_mission":
            mission = core.missions.get(args["id"])
            if mission is None:
                raise NotFound(f"mission {args['id']!r} not found")
            start = args.get("start") or core.robot_node()
            return {"mission": reorder_tsp(mission, start, core.tmap).to_document()}

        if cmd == "list_schedules":
            return {"schedules": [core.schedules[s].to_document() for s in sorted(core.schedules)]}
        if cmd == "get_schedule":
            schedule = core.schedules.get(args["id"])
            if schedule is None:
                raise NotFound(f"schedule {args['id']!r} not found")
            return schedule.to_document()
        if cmd == "save_schedule":
            schedule = Schedule.from_document(args["schedule"])
            core.save_schedule(schedule)
            return {"saved": schedule.id}
        if cmd == "delete_schedule":
            core.delete_schedule(args["id"])
            return dict(_OK)
        if cmd == "set_schedule_enabled":
            schedule = core.set_schedule_enabled(args["id"], bool(args["enabled"]))
            return schedule.to_document()

        if cmd == "list_actions":
            return {"actions": [r.to_document() for r in core.registry.list()]}
        if cmd == "register_action":
            registration = ActionRegistration.from_document(args["registration"])
            core.register_action(registration)
            return {"registered": registration.name}

        if cmd == "log_intervention":
            record = InterventionRecord(
                timestamp=float(args.get("t", core.timeline.now())),
                category=args["category"],
                description=args.get("description", ""),
                operator=args.get("operator", ""),
            )
            core.log_intervention(record)
            return dict(_OK)
        if cmd == "list_interventions":
            limit = int(args.get("limit", 100))
            return {"interventions": [r.to_document() for r in core.interventions[-limit:]]}
        if cmd == "list_records":
            limit = int(args.get("limit", 100))
            return {"records": [r.to_document() for r in core.records[-limit:]]}
        if cmd == "metrics":
            window = float(args.get("window_hours", 7 * 24.0))
            return {
                "mtbi_hours": core.mtbi(window),
                "records": len(core.records),
                "interventions": len(core.interventions),
            }
        raise ProtocolError(f"unhandled command {cmd!r}")  # pragma: no cover
