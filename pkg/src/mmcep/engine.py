"""Query register, window assignment, state management and matching.

Each publisher has one serial ingestion lane. Every (query, publisher) pair
owns an independent window; when a window completes, its state goes to the
matcher exactly once and the resulting notifications are delivered to the
query's subscriber.
"""

from __future__ import annotations

import json
import threading
import time
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from . import rules
from .errors import (
    DuplicateQueryId,
    OutOfOrderTimestamp,
    UnknownClass,
    ValidationError,
)
from .frames import decode_frame
from .graph import MEKG, GraphStream, build_mekg, check_predicates, filter_by_attributes, nodes_by_class
from .query import Query, WindowSpec, parse_query
from .spatial import DEFAULT_AXIS, Rect, rect_tuple
from .temporal import Interval
from .tracking import DEFAULT_IOU_THRESHOLD, GreedyTracker

_DUMP = json.JSONEncoder(separators=(",", ":"), ensure_ascii=True).encode


@dataclass(frozen=True)
class State:
    """Frames captured by one completed window.

    ``previous`` is the stream frame right before the first captured frame,
    used to carry occupancy across window boundaries.
    """

    publisher_id: str
    query_id: str
    seq: int
    frames: Tuple[MEKG, ...]
    previous: Optional[MEKG] = None

    @property
    def start_ms(self):
        return self.frames[0].timestamp

    @property
    def end_ms(self):
        return self.frames[-1].timestamp

    @property
    def span(self) -> Optional[Interval]:
        if self.start_ms < self.end_ms:
            return Interval(self.start_ms, self.end_ms)
        return None

    def __len__(self):
        return len(self.frames)


# -- windows ------------------------------------------------------------------------

class CountWindow:
    def __init__(self, n, slide):
        self.n, self.slide = n, slide
        self.buffer: deque = deque()
        self.before = None
        self.since = 0
        self.started = False

    def offer(self, frame):
        buf = self.buffer
        if len(buf) == self.n:
            self.before = buf.popleft()
        buf.append(frame)
        self.since += 1
        if len(buf) < self.n:
            return None
        if not self.started or self.since >= self.slide:
            self.started = True
            self.since = 0
            captured = (tuple(buf), self.before)
            if self.slide >= self.n:
                self.before = buf[-1]
                buf.clear()
            return captured
        return None

    def flush(self):
        return None


class TimeWindow:
    """Tumbling event-time windows aligned to multiples of the duration."""

    def __init__(self, duration_ms):
        self.duration = duration_ms
        self.index = None
        self.buffer: List[MEKG] = []
        self.before = None
        self.last = None

    def offer(self, frame):
        idx = frame.timestamp // self.duration
        out = None
        if self.index is not None and idx != self.index:
            out = self.flush()
        if not self.buffer:
            self.before = self.last
        self.index = idx
        self.buffer.append(frame)
        self.last = frame
        return out

    def flush(self):
        if not self.buffer:
            return None
        captured = (tuple(self.buffer), self.before)
        self.buffer = []
        return captured


class AbsoluteWindow:
    """Captures frames with ``t_m <= t <= t_n``; completes once a later frame arrives."""

    def __init__(self, t_m, t_n):
        self.t_m, self.t_n = t_m, t_n
        self.buffer: List[MEKG] = []
        self.before = None
        self.done = False

    def offer(self, frame):
        if self.done:
            return None
        if frame.timestamp < self.t_m:
            self.before = frame
            return None
        if frame.timestamp <= self.t_n:
            self.buffer.append(frame)
            return None
        return self.flush()

    def flush(self):
        if self.done or not self.buffer:
            return None
        self.done = True
        return (tuple(self.buffer), self.before)


def make_window(spec: WindowSpec):
    if spec.kind == "count":
        return CountWindow(spec.n, spec.slide)
    if spec.kind == "time":
        return TimeWindow(spec.duration_ms)
    return AbsoluteWindow(spec.t_m, spec.t_n)


# -- notifications --------------------------------------------------------------------

@dataclass(frozen=True)
class FrameMatch:
    timestamp: int
    frame_no: Optional[int]
    nodes: Tuple[Any, ...]

    def to_record(self):
        return {
            "t": self.timestamp,
            "frame_no": self.frame_no,
            "nodes": [
                {
                    "node_id": n.node_id,
                    "class": n.cls,
                    "bbox": list(rect_tuple(n.geometry)),
                    "track_id": n.track_id,
                    "attributes": {k: n.attributes[k] for k in sorted(n.attributes)},
                }
                for n in self.nodes
            ],
        }


@dataclass
class Notification:
    query_id: str
    subscriber_id: str
    publisher_id: str
    start_ms: int
    end_ms: int
    objects: Tuple[FrameMatch, ...] = ()
    relations: Tuple[rules.RuleMatch, ...] = ()
    error: Optional[str] = None
    latency_us: float = 0.0
    emitted_at: float = field(default=0.0, compare=False)
    seq: int = 0

    @property
    def match_kind(self):
        if self.error is not None:
            return "error"
        if self.objects and self.relations:
            return "object+relation"
        return "object" if self.objects else "relation"

    def to_record(self, latency=True):
        bindings: Dict[str, Any] = {}
        if self.objects:
            bindings["objects"] = [m.to_record() for m in self.objects]
        if self.relations:
            bindings["relations"] = [m.to_record() for m in self.relations]
        if self.error is not None:
            bindings["error"] = self.error
        record = {
            "query_id": self.query_id,
            "subscriber_id": self.subscriber_id,
            "publisher_id": self.publisher_id,
            "span_start_ms": self.start_ms,
            "span_end_ms": self.end_ms,
            "match_kind": self.match_kind,
            "bindings": bindings,
        }
        if latency:
            record["latency_us"] = round(self.latency_us, 3)
        return record

    def to_line(self, latency=True):
        return _DUMP(self.to_record(latency))


class Subscription:
    def __init__(self, engine, subscriber_id, sink):
        self.engine = engine
        self.subscriber_id = subscriber_id
        self.sink = sink
        self.active = True

    def unsubscribe(self):
        self.engine._unsubscribe(self)


# -- engine -----------------------------------------------------------------------------

class _QueryRuntime:
    """Window and cross-state memory for one (query, publisher) pair."""

    def __init__(self, query, publisher_id, window):
        self.query = query
        self.publisher_id = publisher_id
        self.window = window
        self.seq = 0
        self.overtakes: Dict[Any, int] = {}
        self.slot_events: Dict[Any, int] = {}


class _Lane:
    def __init__(self, publisher_id, slots, iou_threshold):
        self.publisher_id = publisher_id
        self.slots = tuple(slots)
        self.stream = GraphStream(publisher_id, retain=1)
        self.tracker = GreedyTracker(iou_threshold)
        self.tracking = False
        self.lock = threading.Lock()
        self.runtimes: Tuple[_QueryRuntime, ...] = ()
        self.accepted = 0
        self.rejected = 0


class Engine:
    def __init__(self, schema, *, enrichment: bool = True, max_gap: int = rules.DEFAULT_MAX_GAP,
                 parking_threshold: float = rules.DEFAULT_PARKING_THRESHOLD,
                 axis=DEFAULT_AXIS, iou_threshold: float = DEFAULT_IOU_THRESHOLD,
                 default_window: Optional[WindowSpec] = None, state_backend=None,
                 clock: Callable[[], int] = time.perf_counter_ns):
        self.schema = schema.freeze()
        self.enrichment = enrichment
        self.max_gap = max_gap
        self.parking_threshold = parking_threshold
        self.axis = tuple(axis)
        self.iou_threshold = iou_threshold
        self.default_window = default_window or WindowSpec.count(5)
        self.state_backend = state_backend
        self.clock = clock
        self.queries: Dict[str, Query] = {}
        self.latencies: Dict[str, List[float]] = defaultdict(list)
        self.states_emitted = 0
        self.evaluations = 0
        self._lanes: Dict[str, _Lane] = {}
        self._subs: Dict[str, Tuple[Subscription, ...]] = {}
        self._lock = threading.RLock()
        self._backend_lock = threading.Lock()
        self._stats_lock = threading.Lock()

    # -- configuration ----------------------------------------------------------------

    def add_publisher(self, publisher_id: str, slots: Sequence[Tuple[str, Rect]] = ()):
        with self._lock:
            if publisher_id in self._lanes:
                raise ValidationError(f"publisher {publisher_id!r} already exists")
            self._lanes[publisher_id] = _Lane(publisher_id, slots, self.iou_threshold)

    @property
    def publishers(self):
        return list(self._lanes)

    def lane_stats(self, publisher_id):
        lane = self._lanes[publisher_id]
        return {"accepted": lane.accepted, "rejected": lane.rejected}

    def validate_query(self, query: Query):
        schema = self.schema
        try:
            for spec in query.object_spec:
                classes = schema.expand_label(spec.label, True) | {spec.label}
                check_predicates(spec.where, classes, schema)
                for attr, value in spec.predicates:
                    domains = [schema.attribute_schema(c)[attr] for c in classes
                               if attr in schema.attribute_schema(c)]
                    if not any(value in d for d in domains):
                        raise ValidationError(f"{value!r} is not a valid {spec.label}.{attr}")
            rel = query.relation_spec
            if rel is not None:
                relation = schema.relations.get(rel.relation)
                if relation is None:
                    raise ValidationError(f"unknown relation {rel.relation!r}")
                for given, declared in zip((rel.role_a, rel.role_b), relation.role_classes):
                    if not schema.is_subclass(given, declared):
                        raise ValidationError(
                            f"{rel.relation} expects a {declared} role, {given} is not one"
                        )
                if relation.rule_name == "parking":
                    for pid in query.publishers:
                        lane = self._lanes.get(pid)
                        if lane is not None and not lane.slots:
                            raise ValidationError(f"{rel.relation} needs slots configured for {pid}")
        except UnknownClass as exc:
            raise ValidationError(str(exc)) from exc
        for pid in query.publishers:
            if pid not in self._lanes:
                raise ValidationError(f"unknown publisher {pid!r}")

    def register_query(self, query) -> str:
        if isinstance(query, str):
            query = parse_query(query)
        with self._lock:
            if query.query_id in self.queries:
                raise DuplicateQueryId(f"query {query.query_id!r} already registered")
            self.validate_query(query)
            window = query.window or self.default_window
            self.queries[query.query_id] = query
            for pid in query.publishers:
                lane = self._lanes[pid]
                runtime = _QueryRuntime(query, pid, make_window(window))
                lane.runtimes = lane.runtimes + (runtime,)
        return query.query_id

    def deregister_query(self, query_id: str):
        with self._lock:
            query = self.queries.pop(query_id)
            for pid in query.publishers:
                lane = self._lanes[pid]
                lane.runtimes = tuple(r for r in lane.runtimes if r.query.query_id != query_id)

    def subscribe(self, subscriber_id: str, sink: Callable[[Notification], Any]) -> Subscription:
        sub = Subscription(self, subscriber_id, sink)
        with self._lock:
            self._subs[subscriber_id] = self._subs.get(subscriber_id, ()) + (sub,)
        return sub

    def _unsubscribe(self, sub: Subscription):
        with self._lock:
            sub.active = False
            self._subs[sub.subscriber_id] = tuple(
                s for s in self._subs.get(sub.subscriber_id, ()) if s is not sub
            )

    # -- ingestion ---------------------------------------------------------------------

    def ingest_frame(self, publisher_id: str, record) -> bool:
        """Validate, track, convert and window one frame.

        Returns True when accepted. Stale timestamps and invalid records are
        counted on the lane and re-raised; the stream is left unchanged.
        """
        lane = self._lanes.get(publisher_id)
        if lane is None:
            raise ValidationError(f"unknown publisher {publisher_id!r}")
        if isinstance(record, str):
            record = decode_frame(record)
        with lane.lock:
            last = lane.stream.last_timestamp
            if last is not None and record.timestamp_ms <= last:
                lane.rejected += 1
                raise OutOfOrderTimestamp(
                    f"{publisher_id}: timestamp {record.timestamp_ms} does not follow {last}"
                )
            detections = record.detections
            if lane.tracking or not record.tracked:
                lane.tracking = True
                detections = lane.tracker.update(detections)
            try:
                mekg = build_mekg(detections, self.schema, record.timestamp_ms, record.frame_no)
            except ValidationError:
                lane.rejected += 1
                raise
            lane.stream.append(mekg)
            lane.accepted += 1
            for runtime in lane.runtimes:
                captured = runtime.window.offer(mekg)
                if captured is not None:
                    self._complete(runtime, captured)
        return True

    def flush(self):
        """Close time and absolute windows that are still open; count windows keep residue."""
        for lane in list(self._lanes.values()):
            with lane.lock:
                for runtime in lane.runtimes:
                    captured = runtime.window.flush()
                    if captured is not None:
                        self._complete(runtime, captured)

    def _complete(self, runtime: _QueryRuntime, captured):
        frames, previous = captured
        runtime.seq += 1
        state = State(runtime.publisher_id, runtime.query.query_id, runtime.seq, frames, previous)
        self.on_window_complete(state, runtime)

    def on_window_complete(self, state: State, runtime: Optional[_QueryRuntime] = None):
        with self._stats_lock:
            self.states_emitted += 1
        if self.state_backend is not None:
            nodes = sum(len(f.nodes) for f in state.frames)
            line = _DUMP({
                "publisher_id": state.publisher_id,
                "query_id": state.query_id,
                "seq": state.seq,
                "span": [state.start_ms, state.end_ms],
                "frames": len(state.frames),
                "nodes": nodes,
            })
            with self._backend_lock:
                self.state_backend.write(line + "\n")
        query = runtime.query if runtime is not None else self.queries[state.query_id]
        for note in self.match(state, [query], runtime):
            self._deliver(note)

    # -- matching ---------------------------------------------------------------------

    def match(self, state: State, queries: Sequence[Query], runtime=None) -> List[Notification]:
        if not state.frames:
            return []
        out = []
        for query in queries:
            if state.publisher_id not in query.publishers:
                continue
            rt = runtime if runtime is not None and runtime.query is query else None
            t0 = self.clock()
            objects: Tuple[FrameMatch, ...] = ()
            relations: Tuple[rules.RuleMatch, ...] = ()
            error = None
            try:
                if query.object_spec:
                    objects = self._match_objects(state, query)
                if query.relation_spec is not None:
                    relations = self._match_relation(state, query, rt)
            except Exception as exc:  # isolate one query's failure from the others
                error = f"{type(exc).__name__}: {exc}"
            note = None
            if objects or relations or error:
                note = Notification(
                    query.query_id, query.subscriber_id, state.publisher_id,
                    state.start_ms, state.end_ms, objects, relations, error,
                    emitted_at=time.time(), seq=state.seq,
                )
            elapsed_us = (self.clock() - t0) / 1000.0
            with self._stats_lock:
                self.evaluations += 1
                self.latencies[query.query_id].append(elapsed_us)
            if note is not None:
                note.latency_us = elapsed_us
                out.append(note)
        return out

    def _match_objects(self, state, query):
        schema = self.schema
        matches = []
        for frame in state.frames:
            hits = []
            seen = set()
            for spec in query.object_spec:
                nodes = nodes_by_class(frame, spec.label, schema, self.enrichment)
                if spec.predicates:
                    nodes = filter_by_attributes(nodes, spec.where)
                for n in nodes:
                    if n.node_id not in seen:
                        seen.add(n.node_id)
                        hits.append(n)
            if hits:
                matches.append(FrameMatch(frame.timestamp, frame.frame_no, tuple(hits)))
        return tuple(matches)

    def _match_relation(self, state, query, runtime):
        rel = query.relation_spec
        relation = self.schema.relations[rel.relation]
        rule_name = relation.rule_name
        if rule_name == "overtake":
            cfg = rules.OvertakeConfig(rel.role_a, rel.role_b, self.axis, self.max_gap)
            found = rules.eval_overtake(state, cfg, self.schema)
            if runtime is not None:
                found = self._cooldown(found, state, runtime)
        elif rule_name == "parking":
            lane = self._lanes[state.publisher_id]
            cfg = rules.ParkingConfig(lane.slots, rel.role_a, self.parking_threshold)
            found = rules.eval_parking(state, cfg, self.schema, previous=state.previous)
            if runtime is not None:
                found = self._dedup_slots(found, runtime)
        else:
            rule = self.schema.rules[rule_name]
            found = rules.eval_pattern(rule, state, self.schema, (rel.role_a, rel.role_b), self.max_gap)
        return tuple(
            rules.RuleMatch(rel.relation, m.event, m.bindings, m.start_ms, m.end_ms, m.detail)
            for m in found
        )

    @staticmethod
    def _cooldown(found, state, runtime):
        cooldown = max(state.end_ms - state.start_ms, 1)
        kept = []
        for m in found:
            key = (frozenset((m.detail["overtaker"], m.detail["overtaken"])), m.detail["overtaker"])
            last = runtime.overtakes.get(key)
            if last is not None and m.end_ms - last < cooldown:
                continue
            runtime.overtakes[key] = m.end_ms
            kept.append(m)
        return kept

    @staticmethod
    def _dedup_slots(found, runtime):
        kept = []
        for m in found:
            slot = m.bound["slot"]
            if m.end_ms <= runtime.slot_events.get(slot, -1):
                continue
            runtime.slot_events[slot] = m.end_ms
            kept.append(m)
        return kept

    # -- delivery ---------------------------------------------------------------------

    def _deliver(self, note: Notification):
        for sub in self._subs.get(note.subscriber_id, ()):
            if sub.active:
                sub.sink(note)

    def latency_series(self, query_id=None):
        if query_id is not None:
            return list(self.latencies.get(query_id, ()))
        return {q: list(v) for q, v in self.latencies.items()}
