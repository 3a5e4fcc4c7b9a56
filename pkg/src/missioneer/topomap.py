"""Topological map: named, positioned nodes joined by typed, costed edges.

Maps are immutable values; edits produce a new map with the version counter
bumped, which is what lets navigation detect mid-route changes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    Conflict,
    EmptyInput,
    EmptyMap,
    InvalidEdit,
    InvalidInput,
    NotFound,
    ParseError,
    ValidationError,
)

WAYPOINT = "waypoint"
INSPECTION = "inspection"
DOCK = "dock"
NODE_KINDS = (WAYPOINT, INSPECTION, DOCK)

WALK = "walk"
STAIRS = "stairs"
DOOR = "door"
BUILTIN_ACTIONS = (WALK, STAIRS, DOOR)  # any other action string is a custom traversal


@dataclass(frozen=True)
class Node:
    id: str
    name: str
    position: tuple[float, float, float]
    kind: str = WAYPOINT

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))

    def position_array(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    action: str = WALK
    cost: float = 0.0
    active: bool = True

    def key(self) -> tuple[str, str, str]:
        return (self.source, self.target, self.action)


def node_violations(node: Node) -> list[str]:
    out = []
    if not node.id:
        out.append("node id must be non-empty")
    if not node.name:
        out.append(f"node {node.id!r}: name must be non-empty")
    if len(node.position) != 3 or not all(math.isfinite(v) for v in node.position):
        out.append(f"node {node.id!r}: position must be a finite 3-vector")
    if node.kind not in NODE_KINDS:
        out.append(f"node {node.id!r}: unknown kind {node.kind!r}")
    return out


def edge_violations(edge: Edge, node_ids) -> list[str]:
    out = []
    if edge.source == edge.target:
        out.append(f"edge {edge.key()}: source equals target")
    for end, label in ((edge.source, "source"), (edge.target, "target")):
        if end not in node_ids:
            out.append(f"edge {edge.key()}: {label} {end!r} does not exist")
    if not edge.action:
        out.append(f"edge {edge.key()}: empty action")
    if not (math.isfinite(edge.cost) and edge.cost >= 0):
        out.append(f"edge {edge.key()}: cost must be finite and >= 0")
    return out


@dataclass(frozen=True)
class TopologicalMap:
    nodes: tuple[Node, ...] = ()
    edges: tuple[Edge, ...] = ()
    frame_id: str = "map"
    version: int = 0

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {n.id: n for n in self.nodes})
        out_edges: dict[str, list[Edge]] = {}
        for e in self.edges:
            out_edges.setdefault(e.source, []).append(e)
        object.__setattr__(self, "_out", out_edges)

    # -- lookups ------------------------------------------------------------

    def node(self, node_id: str) -> Node:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise NotFound(f"no node {node_id!r}")

    def has_node(self, node_id: str) -> bool:
        return node_id in self._by_id

    def edges_from(self, node_id: str) -> tuple[Edge, ...]:
        return tuple(self._out.get(node_id, ()))

    def find_edge(self, source: str, target: str, action: str | None = None) -> Edge:
        matches = [
            e
            for e in self._out.get(source, ())
            if e.target == target and (action is None or e.action == action)
        ]
        if not matches:
            raise NotFound(f"no edge {source}->{target}" + (f" ({action})" if action else ""))
        if len(matches) > 1:
            raise InvalidEdit(
                f"edge {source}->{target} is ambiguous; specify the action",
                candidates=[e.action for e in matches],
            )
        return matches[0]

    def violations(self) -> list[str]:
        out = []
        seen_ids = set()
        for n in self.nodes:
            out.extend(node_violations(n))
            if n.id in seen_ids:
                out.append(f"duplicate node id {n.id!r}")
            seen_ids.add(n.id)
        seen_keys = set()
        for e in self.edges:
            out.extend(edge_violations(e, self._by_id))
            if e.key() in seen_keys:
                out.append(f"duplicate edge {e.key()}")
            seen_keys.add(e.key())
        return out

    def validate(self) -> "TopologicalMap":
        problems = self.violations()
        if problems:
            raise ValidationError("map invariants violated", violations=problems)
        return self

    # -- derived ------------------------------------------------------------

    def euclidean(self, a: str, b: str) -> float:
        return float(np.linalg.norm(self.node(a).position_array() - self.node(b).position_array()))

    def nodes_of_kind(self, kind: str) -> list[Node]:
        return [n for n in self.nodes if n.kind == kind]

    def bumped(self, **changes) -> "TopologicalMap":
        return replace(self, version=self.version + 1, **changes)


def default_cost(tmap: TopologicalMap, source: str, target: str) -> float:
    return tmap.euclidean(source, target)


def bidirectional(source: str, target: str, action: str = WALK, cost: float = 0.0) -> tuple[Edge, Edge]:
    return (Edge(source, target, action, cost), Edge(target, source, action, cost))


# -- construction ----------------------------------------------------------


def build_from_pose_graph(poses, link_threshold: float) -> TopologicalMap:
    """Seed a map from an ordered pose list: consecutive poses are linked, and
    so is any pair closer than link_threshold."""
    arr = np.asarray(poses, dtype=float)
    if arr.size == 0:
        raise EmptyInput("pose list is empty")
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidInput(f"poses must be (N, 3), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidInput("pose list contains non-finite values")
    if not (link_threshold > 0):
        raise InvalidInput("link_threshold must be > 0")

    nodes = tuple(Node(f"n{i}", f"n{i}", tuple(p), WAYPOINT) for i, p in enumerate(arr))
    n = len(nodes)
    dists = np.linalg.norm(arr[:, None, :] - arr[None, :, :], axis=2)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or dists[i, j] < link_threshold:
                cost = float(dists[i, j])
                edges.append(Edge(nodes[i].id, nodes[j].id, WALK, cost))
                edges.append(Edge(nodes[j].id, nodes[i].id, WALK, cost))
    return TopologicalMap(nodes, tuple(edges)).validate()


def nearest_node(tmap: TopologicalMap, position) -> str:
    """Node id minimising Euclidean distance; ties go to the smallest id."""
    if not tmap.nodes:
        raise EmptyMap("map has no nodes")
    pos = np.asarray(position, dtype=float)
    best_id = None
    best_d2 = math.inf
    for node in tmap.nodes:
        d2 = float(np.sum((node.position_array() - pos) ** 2))
        if d2 < best_d2 or (d2 == best_d2 and (best_id is None or node.id < best_id)):
            best_d2 = d2
            best_id = node.id
    return best_id


# -- edits -----------------------------------------------------------------

EDIT_OPS = (
    "add_node",
    "remove_node",
    "move_node",
    "rename_node",
    "add_edge",
    "remove_edge",
    "set_edge_active",
    "set_edge_cost",
)


@dataclass(frozen=True)
class MapEdit:
    """One self-describing map edit; `invert` derives its undo from the
    pre-edit map."""

    op: str
    node: Node | None = None
    node_id: str | None = None
    position: tuple[float, float, float] | None = None
    name: str | None = None
    edge: Edge | None = None
    edge_key: tuple[str, str, str] | None = None
    active: bool | None = None
    cost: float | None = None
    bidirectional: bool = False

    @staticmethod
    def add_node(node: Node) -> "MapEdit":
        return MapEdit("add_node", node=node)

    @staticmethod
    def remove_node(node_id: str) -> "MapEdit":
        return MapEdit("remove_node", node_id=node_id)

    @staticmethod
    def move_node(node_id: str, position) -> "MapEdit":
        return MapEdit("move_node", node_id=node_id, position=tuple(float(v) for v in position))

    @staticmethod
    def rename_node(node_id: str, name: str) -> "MapEdit":
        return MapEdit("rename_node", node_id=node_id, name=name)

    @staticmethod
    def add_edge(edge: Edge, bidirectional: bool = False) -> "MapEdit":
        return MapEdit("add_edge", edge=edge, bidirectional=bidirectional)

    @staticmethod
    def remove_edge(source: str, target: str, action: str = WALK) -> "MapEdit":
        return MapEdit("remove_edge", edge_key=(source, target, action))

    @staticmethod
    def set_edge_active(source: str, target: str, action: str, active: bool) -> "MapEdit":
        return MapEdit("set_edge_active", edge_key=(source, target, action), active=active)

    @staticmethod
    def set_edge_cost(source: str, target: str, action: str, cost: float) -> "MapEdit":
        return MapEdit("set_edge_cost", edge_key=(source, target, action), cost=float(cost))

    def to_document(self) -> dict:
        doc = {"op": self.op}
        if self.node is not None:
            doc["node"] = _node_doc(self.node)
        if self.node_id is not None:
            doc["node_id"] = self.node_id
        if self.position is not None:
            doc["position"] = list(self.position)
        if self.name is not None:
            doc["name"] = self.name
        if self.edge is not None:
            doc["edge"] = _edge_doc(self.edge)
        if self.edge_key is not None:
            doc["edge_key"] = list(self.edge_key)
        if self.active is not None:
            doc["active"] = self.active
        if self.cost is not None:
            doc["cost"] = self.cost
        if self.bidirectional:
            doc["bidirectional"] = True
        return doc

    @staticmethod
    def from_document(doc: dict) -> "MapEdit":
        if not isinstance(doc, dict) or "op" not in doc:
            raise ParseError("map edit document needs an 'op' field")
        op = doc["op"]
        if op not in EDIT_OPS:
            raise ParseError(f"unknown edit op {op!r}")
        try:
            return MapEdit(
                op,
                node=_node_from_doc(doc["node"]) if "node" in doc else None,
                node_id=doc.get("node_id"),
                position=tuple(doc["position"]) if "position" in doc else None,
                name=doc.get("name"),
                edge=_edge_from_doc(doc["edge"]) if "edge" in doc else None,
                edge_key=tuple(doc["edge_key"]) if "edge_key" in doc else None,
                active=doc.get("active"),
                cost=doc.get("cost"),
                bidirectional=bool(doc.get("bidirectional", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed {op} edit: {exc}")


def apply_edit(tmap: TopologicalMap, edit: MapEdit) -> TopologicalMap:
    """Apply one edit, returning a new map with version + 1."""
    op = edit.op
    if op == "add_node":
        node = edit.node
        if node is None:
            raise InvalidEdit("add_node needs a node")
        problems = node_violations(node)
        if problems:
            raise InvalidEdit("; ".join(problems))
        if tmap.has_node(node.id):
            raise Conflict(f"node {node.id!r} already exists")
        return tmap.bumped(nodes=tmap.nodes + (node,))

    if op == "remove_node":
        node = tmap.node(edit.node_id)  # raises NotFound
        nodes = tuple(n for n in tmap.nodes if n.id != edit.node_id)
        edges = tuple(e for e in tmap.edges if edit.node_id not in (e.source, e.target))
        return tmap.bumped(nodes=nodes, edges=edges)

    if op == "move_node":
        node = tmap.node(edit.node_id)
        if edit.position is None or len(edit.position) != 3 or not all(
            math.isfinite(v) for v in edit.position
        ):
            raise InvalidEdit("move_node needs a finite 3-vector position")
        moved = replace(node, position=edit.position)
        return tmap.bumped(nodes=tuple(moved if n.id == node.id else n for n in tmap.nodes))

    if op == "rename_node":
        node = tmap.node(edit.node_id)
        if not edit.name:
            raise InvalidEdit("rename_node needs a non-empty name")
        renamed = replace(node, name=edit.name)
        return tmap.bumped(nodes=tuple(renamed if n.id == node.id else n for n in tmap.nodes))

    if op == "add_edge":
        edge = edit.edge
        if edge is None:
            raise InvalidEdit("add_edge needs an edge")
        new_edges = [edge]
        if edit.bidirectional:
            new_edges.append(Edge(edge.target, edge.source, edge.action, edge.cost, edge.active))
        existing = {e.key() for e in tmap.edges}
        for e in new_edges:
            problems = edge_violations(e, {n.id for n in tmap.nodes})
            if problems:
                raise InvalidEdit("; ".join(problems))
            if e.key() in existing:
                raise Conflict(f"edge {e.key()} already exists")
        return tmap.bumped(edges=tmap.edges + tuple(new_edges))

    if op == "remove_edge":
        keys = {edit.edge_key}
        tmap.find_edge(*edit.edge_key)  # raises NotFound
        if edit.bidirectional:
            src, dst, action = edit.edge_key
            keys.add((dst, src, action))
        return tmap.bumped(edges=tuple(e for e in tmap.edges if e.key() not in keys))

    if op == "set_edge_active":
        if edit.active is None:
            raise InvalidEdit("set_edge_active needs an active flag")
        edge = tmap.find_edge(*edit.edge_key)
        updated = replace(edge, active=bool(edit.active))
        return tmap.bumped(edges=tuple(updated if e.key() == edge.key() else e for e in tmap.edges))

    if op == "set_edge_cost":
        if edit.cost is None or not (math.isfinite(edit.cost) and edit.cost >= 0):
            raise InvalidEdit("set_edge_cost needs a finite cost >= 0")
        edge = tmap.find_edge(*edit.edge_key)
        updated = replace(edge, cost=float(edit.cost))
        return tmap.bumped(edges=tuple(updated if e.key() == edge.key() else e for e in tmap.edges))

    raise InvalidEdit(f"unknown edit op {op!r}")


def invert_edit(tmap: TopologicalMap, edit: MapEdit) -> MapEdit | list[MapEdit]:
    """Edit(s) that undo `edit` when applied to apply_edit(tmap, edit).

    remove_node expands to a node re-add plus re-adds of every incident edge,
    so a list is returned for that variant.
    """
    op = edit.op
    if op == "add_node":
        return MapEdit.remove_node(edit.node.id)
    if op == "remove_node":
        node = tmap.node(edit.node_id)
        incident = [e for e in tmap.edges if edit.node_id in (e.source, e.target)]
        return [MapEdit.add_node(node)] + [MapEdit.add_edge(e) for e in incident]
    if op == "move_node":
        return MapEdit.move_node(edit.node_id, tmap.node(edit.node_id).position)
    if op == "rename_node":
        return MapEdit.rename_node(edit.node_id, tmap.node(edit.node_id).name)
    if op == "add_edge":
        return MapEdit(
            "remove_edge", edge_key=edit.edge.key(), bidirectional=edit.bidirectional
        )
    if op == "remove_edge":
        return MapEdit.add_edge(tmap.find_edge(*edit.edge_key), bidirectional=edit.bidirectional)
    if op == "set_edge_active":
        prior = tmap.find_edge(*edit.edge_key)
        return MapEdit.set_edge_active(*edit.edge_key, active=prior.active)
    if op == "set_edge_cost":
        prior = tmap.find_edge(*edit.edge_key)
        return MapEdit.set_edge_cost(*edit.edge_key, cost=prior.cost)
    raise InvalidEdit(f"unknown edit op {op!r}")


# -- persistence -----------------------------------------------------------

_NODE_KEYS = {"id", "name", "kind", "position"}
_EDGE_KEYS = {"source", "target", "action", "cost", "active"}
_MAP_KEYS = {"frame_id", "version", "nodes", "edges"}


def _node_doc(n: Node) -> dict:
    return {"id": n.id, "name": n.name, "kind": n.kind, "position": [float(v) for v in n.position]}


def _edge_doc(e: Edge) -> dict:
    return {
        "source": e.source,
        "target": e.target,
        "action": e.action,
        "cost": float(e.cost),
        "active": bool(e.active),
    }


def _node_from_doc(doc: dict) -> Node:
    unknown = set(doc) - _NODE_KEYS
    if unknown:
        raise ParseError(f"node document has unknown keys {sorted(unknown)}")
    try:
        return Node(
            id=str(doc["id"]),
            name=str(doc["name"]),
            position=tuple(float(v) for v in doc["position"]),
            kind=str(doc.get("kind", WAYPOINT)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed node document: {exc}")


def _edge_from_doc(doc: dict) -> Edge:
    unknown = set(doc) - _EDGE_KEYS
    if unknown:
        raise ParseError(f"edge document has unknown keys {sorted(unknown)}")
    try:
        return Edge(
            source=str(doc["source"]),
            target=str(doc["target"]),
            action=str(doc.get("action", WALK)),
            cost=float(doc.get("cost", 0.0)),
            active=bool(doc.get("active", True)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed edge document: {exc}")


def map_to_document(tmap: TopologicalMap) -> dict:
    return {
        "frame_id": tmap.frame_id,
        "version": tmap.version,
        "nodes": [_node_doc(n) for n in tmap.nodes],
        "edges": [_edge_doc(e) for e in tmap.edges],
    }


def map_from_document(doc: dict) -> TopologicalMap:
    if not isinstance(doc, dict):
        raise ParseError("map document must be an object")
    unknown = set(doc) - _MAP_KEYS
    if unknown:
        raise ParseError(f"map document has unknown keys {sorted(unknown)}")
    for key in ("frame_id", "nodes", "edges"):
        if key not in doc:
            raise ParseError(f"map document missing {key!r}")
    version = doc.get("version", 0)
    if not isinstance(version, int) or version < 0:
        raise ParseError(f"version must be a non-negative integer, got {version!r}")
    nodes = tuple(_node_from_doc(d) for d in doc["nodes"])
    edges = tuple(_edge_from_doc(d) for d in doc["edges"])
    tmap = TopologicalMap(nodes, edges, frame_id=str(doc["frame_id"]), version=version)
    return tmap.validate()


def save_map(tmap: TopologicalMap) -> str:
    """Canonical JSON text: keys sorted, metres as decimals."""
    return json.dumps(map_to_document(tmap), sort_keys=True, indent=2) + "\n"


def load_map(text: str) -> TopologicalMap:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    return map_from_document(doc)
