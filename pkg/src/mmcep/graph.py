"""Per-frame multimedia event knowledge graphs and ordered graph streams."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterable, List, Mapping, Optional, Sequence

from .errors import (
    OutOfOrderTimestamp,
    UnknownAttribute,
    UnknownClass,
    ValidationError,
)
from .spatial import Rect


@dataclass(frozen=True, slots=True)
class ObjectNode:
    node_id: int
    cls: str
    geometry: Rect
    attributes: Mapping[str, Any] = field(default_factory=dict)
    confidence: float = 1.0
    track_id: Optional[Any] = None


@dataclass(frozen=True, slots=True)
class RelationEdge:
    subject: int
    object: int
    label: str


class MEKG:
    """One frame: object nodes, labelled relation edges and a timestamp (ms).

    Nodes carry their class label and edges their relation label, which
    together realise the labelling function. Values are treated as immutable
    once built.
    """

    __slots__ = ("timestamp", "nodes", "edges", "frame_no", "_tracks")

    def __init__(self, timestamp: int, nodes: Sequence[ObjectNode] = (),
                 edges: Sequence[RelationEdge] = (), frame_no: Optional[int] = None):
        self.timestamp = timestamp
        self.nodes = tuple(nodes)
        self.edges = tuple(edges)
        self.frame_no = frame_no
        self._tracks = None
        if edges:
            ids = {n.node_id for n in self.nodes}
            labels = {n.cls for n in self.nodes}
            for e in self.edges:
                if e.subject == e.object:
                    raise ValidationError(f"self-relation on node {e.subject}")
                if e.subject not in ids or e.object not in ids:
                    raise ValidationError(f"edge {e} references a node outside the frame")
                if e.label in labels:
                    raise ValidationError(f"edge label {e.label!r} collides with an object class")

    def by_track(self, track_id) -> Optional[ObjectNode]:
        tracks = self._tracks
        if tracks is None:
            tracks = self._tracks = {n.track_id: n for n in self.nodes if n.track_id is not None}
        return tracks.get(track_id)

    def with_edges(self, edges: Iterable[RelationEdge]) -> "MEKG":
        return MEKG(self.timestamp, self.nodes, self.edges + tuple(edges), self.frame_no)

    def structure(self):
        """Comparable snapshot of the graph content."""
        return (self.timestamp, self.frame_no, self.nodes, self.edges)

    def __eq__(self, other):
        return isinstance(other, MEKG) and self.structure() == other.structure()

    __hash__ = None

    def __len__(self):
        return len(self.nodes)

    def __repr__(self):
        return f"MEKG(t={self.timestamp}, nodes={len(self.nodes)}, edges={len(self.edges)})"


class GraphStream:
    """Strictly timestamp-ordered frames of one publisher.

    ``retain`` bounds how many frames are kept in memory; ``None`` keeps all.
    """

    def __init__(self, publisher_id: str, retain: Optional[int] = None):
        self.publisher_id = publisher_id
        self.frames: deque = deque(maxlen=retain)
        self.last_timestamp: Optional[int] = None
        self.appended = 0

    def append(self, mekg: MEKG) -> "GraphStream":
        if self.last_timestamp is not None and mekg.timestamp <= self.last_timestamp:
            raise OutOfOrderTimestamp(
                f"{self.publisher_id}: timestamp {mekg.timestamp} does not follow {self.last_timestamp}"
            )
        self.frames.append(mekg)
        self.last_timestamp = mekg.timestamp
        self.appended += 1
        return self

    def timestamps(self) -> List[int]:
        return [f.timestamp for f in self.frames]

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)


def _detection_fields(det):
    if type(det) is dict or (not hasattr(det, "cls") and isinstance(det, Mapping)):
        return (det["class"], det["bbox"], det.get("attributes") or {},
                det.get("confidence", 1.0), det.get("track_id"))
    return det.cls, det.bbox, det.attributes, det.confidence, det.track_id


def build_mekg(frame_detections: Iterable[Any], schema, timestamp: int,
               frame_no: Optional[int] = None) -> MEKG:
    """Validate detections against ``schema`` and wrap them as one frame graph.

    Detections are mappings (``class``, ``bbox``, ``attributes``,
    ``confidence``, ``track_id``) or objects with matching attributes. No
    spatial edges are materialised here.
    """
    classes = schema.classes
    nodes = []
    for i, det in enumerate(frame_detections):
        cls, bbox, attributes, confidence, track_id = _detection_fields(det)
        if cls not in classes:
            raise UnknownClass(f"class {cls!r} is not registered")
        if attributes:
            schema.validate_attributes(cls, attributes)
        if not 0.0 <= confidence <= 1.0:
            raise ValidationError(f"confidence {confidence} outside [0, 1]")
        if isinstance(bbox, Rect):
            rect = bbox
        else:
            x, y, w, h = bbox
            rect = Rect(x, y, w, h)
        nodes.append(ObjectNode(i, cls, rect, attributes, confidence, track_id))
    return MEKG(timestamp, nodes, (), frame_no)


def nodes_by_class(mekg: MEKG, label: str, schema, enrich: bool = True) -> List[ObjectNode]:
    wanted = schema.expand_label(label, enrich)
    return [n for n in mekg.nodes if n.cls in wanted]


def check_predicates(predicates: Mapping[str, Any], classes: Iterable[str], schema):
    """Raise UnknownAttribute unless every predicate attribute exists on some class."""
    known = set()
    for cls in classes:
        known.update(schema.attribute_schema(cls))
    for attr in predicates:
        if attr not in known:
            raise UnknownAttribute(f"no attribute {attr!r} on {sorted(classes)}")


def filter_by_attributes(nodes: Sequence[ObjectNode], predicates: Mapping[str, Any],
                         schema=None) -> List[ObjectNode]:
    if not predicates:
        return list(nodes)
    if schema is not None and nodes:
        check_predicates(predicates, {n.cls for n in nodes}, schema)
    items = tuple(predicates.items())
    return [n for n in nodes if all(n.attributes.get(k) == v for k, v in items)]
