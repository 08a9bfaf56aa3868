"""Wire an engine from a configuration file and replay its publishers."""

from __future__ import annotations

import heapq
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, TextIO

from .config import EngineConfig, PublisherConfig, load_schema
from .engine import Engine, Notification
from .frames import FrameRecord, parse_frames
from .query import parse_query, parse_window
from .scenarios import ScenarioSpec, generate_scenario
from .spatial import Rect


@dataclass
class RunResult:
    engine: Engine
    notifications: List[Notification] = field(default_factory=list)
    frames: int = 0

    def lines(self, latency=True) -> List[str]:
        return [n.to_line(latency) for n in self.notifications]


def publisher_frames(pub: PublisherConfig, cfg: EngineConfig):
    """Frames for one publisher plus any slots its synthetic scenario defines."""
    kind = pub.synthetic
    if kind is None:
        return parse_frames(cfg.resolve(pub.source)), ()
    params = dict(pub.params)
    params.setdefault("stream_id", pub.publisher_id)
    spec = ScenarioSpec(kind, seed=pub.seed, frames=pub.frames, fps=pub.fps, params=params)
    frames, gt = generate_scenario(spec)
    slots = tuple((sid, Rect(*box)) for sid, box in gt.meta.get("slots", ()))
    return frames, slots


def build_engine(cfg: EngineConfig, state_backend: Optional[TextIO] = None):
    """Engine with every publisher and query registered, and each publisher's frames."""
    schema = load_schema(cfg.resolve(cfg.schema))
    engine = Engine(
        schema,
        enrichment=cfg.enrichment,
        max_gap=cfg.max_gap,
        parking_threshold=cfg.parking_threshold,
        axis=cfg.axis,
        iou_threshold=cfg.iou_threshold,
        default_window=parse_window(cfg.default_window),
        state_backend=state_backend,
    )
    feeds: Dict[str, List[FrameRecord]] = {}
    for pub in cfg.publishers:
        frames, scenario_slots = publisher_frames(pub, cfg)
        engine.add_publisher(pub.publisher_id, pub.slots or scenario_slots)
        feeds[pub.publisher_id] = frames
    for text in cfg.queries:
        engine.register_query(parse_query(text))
    return engine, feeds


def _merged(feeds):
    """Frames of all publishers in (timestamp, publisher order) sequence."""
    lanes = [[((f.timestamp_ms, i), pid, f) for f in frames]
             for i, (pid, frames) in enumerate(feeds.items())]
    return heapq.merge(*lanes, key=lambda item: item[0])


def _note_order(n: Notification):
    return (n.start_ms, n.end_ms, n.publisher_id, n.query_id, n.seq)


def run(cfg: EngineConfig, parallel: bool = False, state_backend: Optional[TextIO] = None) -> RunResult:
    """Replay every publisher to the end and flush open windows.

    Serial mode interleaves publishers by timestamp; parallel mode gives each
    publisher its own thread. Either way the collected notifications are
    returned in a canonical order so logs compare byte for byte.
    """
    engine, feeds = build_engine(cfg, state_backend)
    collected: List[Notification] = []
    lock = threading.Lock()

    def sink(note):
        with lock:
            collected.append(note)

    for sid in sorted({q.subscriber_id for q in engine.queries.values()}):
        engine.subscribe(sid, sink)

    if parallel:
        errors = []

        def drive(pid, frames):
            try:
                for f in frames:
                    engine.ingest_frame(pid, f)
            except BaseException as exc:
                errors.append(exc)

        threads = [threading.Thread(target=drive, args=item) for item in feeds.items()]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise errors[0]
    else:
        for _, pid, frame in _merged(feeds):
            engine.ingest_frame(pid, frame)
    engine.flush()
    collected.sort(key=_note_order)
    return RunResult(engine, collected, sum(len(f) for f in feeds.values()))
