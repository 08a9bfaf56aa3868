"""Scoring and measurement harness: per-state F1, matcher latency, ingest throughput."""

from __future__ import annotations

import statistics
import threading
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Tuple

from .errors import RangeMismatch
from .spatial import Rect, iou

MATCH_IOU = 0.5


@dataclass(frozen=True)
class StateScore:
    index: int
    first_frame: int
    last_frame: int
    f1: Fraction
    per_frame: Tuple[Fraction, ...]

    def to_record(self):
        return {"state": self.index, "frames": [self.first_frame, self.last_frame],
                "f1": round(float(self.f1), 6),
                "per_frame": [round(float(f), 6) for f in self.per_frame]}


@dataclass(frozen=True)
class LatencyReport:
    series: Tuple[float, ...]
    mean: float
    median: float
    p99: float

    def to_record(self):
        return {"count": len(self.series), "mean_us": round(self.mean, 3),
                "median_us": round(self.median, 3), "p99_us": round(self.p99, 3)}


# -- F1 -----------------------------------------------------------------------------

def _note_record(note) -> Mapping[str, Any]:
    return note if isinstance(note, Mapping) else note.to_record(latency=False)


def predicted_objects(notifications: Iterable[Any], query_id=None) -> Dict[int, List[Tuple[str, tuple]]]:
    """Matched nodes per frame timestamp, as (class, bbox)."""
    out: Dict[int, List[Tuple[str, tuple]]] = {}
    for note in notifications:
        rec = _note_record(note)
        if query_id is not None and rec["query_id"] != query_id:
            continue
        for frame in rec.get("bindings", {}).get("objects", ()):
            bucket = out.setdefault(frame["t"], [])
            bucket.extend((n["class"], tuple(n["bbox"])) for n in frame["nodes"])
    return out


def expected_objects(gt, label=None, predicates=None, schema=None) -> Dict[int, List[Tuple[str, tuple]]]:
    """Ground-truth objects per frame timestamp that the query should return."""
    if label is None:
        wanted = None
    elif schema is not None:
        wanted = {c for c in schema.classes if schema.is_subclass(c, label)}
    else:
        wanted = {label}
    preds = dict(predicates or {})
    out = {}
    for row in gt.presence:
        objs = []
        for o in row["objects"]:
            if wanted is not None and o["class"] not in wanted:
                continue
            attrs = o.get("attributes", {})
            if any(attrs.get(k) != v for k, v in preds.items()):
                continue
            objs.append((o["class"], tuple(o["bbox"])))
        out[row["timestamp_ms"]] = objs
    return out


def match_count(predicted, expected, threshold=MATCH_IOU) -> int:
    """Greedy one-to-one matching by descending IoU with class agreement."""
    pairs = []
    for i, (pc, pb) in enumerate(predicted):
        for j, (ec, eb) in enumerate(expected):
            if pc != ec:
                continue
            score = iou(Rect(*pb), Rect(*eb))
            if score >= threshold:
                pairs.append((-score, i, j))
    pairs.sort()
    used_p, used_e = set(), set()
    for _, i, j in pairs:
        if i not in used_p and j not in used_e:
            used_p.add(i)
            used_e.add(j)
    return len(used_p)


def frame_f1(n_pred: int, n_true: int, tp: int) -> Fraction:
    if n_pred == 0 and n_true == 0:
        return Fraction(1)
    return Fraction(2 * tp, n_pred + n_true)


def compute_f1(notifications, gt, window_n: int, label=None, predicates=None, schema=None,
               query_id=None) -> List[StateScore]:
    """Per-state F1: the mean of per-frame F1 over consecutive ``window_n`` frames.

    A trailing partial window is dropped, as a count window never completes it.
    """
    if window_n < 1:
        raise ValueError("window size must be at least 1")
    expected = expected_objects(gt, label, predicates, schema)
    predicted = predicted_objects(notifications, query_id)
    stray = sorted(set(predicted) - set(expected))
    if stray:
        raise RangeMismatch(f"notifications cover frames at t={stray[:5]} absent from the ground truth")
    order = [(row["timestamp_ms"], row["frame_no"]) for row in gt.presence]
    scores = []
    for s in range(len(order) // window_n):
        chunk = order[s * window_n:(s + 1) * window_n]
        per_frame = []
        for ts, _ in chunk:
            pred, true = predicted.get(ts, []), expected[ts]
            per_frame.append(frame_f1(len(pred), len(true), match_count(pred, true)))
        scores.append(StateScore(s, chunk[0][1], chunk[-1][1],
                                 sum(per_frame, Fraction(0)) / len(per_frame), tuple(per_frame)))
    return scores


# -- latency ------------------------------------------------------------------------

def summarize(series: Sequence[float]) -> LatencyReport:
    if not series:
        return LatencyReport((), 0.0, 0.0, 0.0)
    ordered = sorted(series)
    rank = max(0, min(len(ordered) - 1, int(round(0.99 * (len(ordered) - 1)))))
    return LatencyReport(tuple(series), statistics.fmean(series), statistics.median(series), ordered[rank])


def measure_latency(engine, query_id=None):
    """Matcher-only latency per state (µs) as recorded by the engine.

    Returns one report for ``query_id``, or a mapping of all queries.
    """
    if query_id is not None:
        return summarize(engine.latency_series(query_id))
    return {q: summarize(s) for q, s in sorted(engine.latency_series().items())}


# -- throughput ---------------------------------------------------------------------

def _drive(engine, pid, frames, errors):
    try:
        for f in frames:
            engine.ingest_frame(pid, f)
    except BaseException as exc:  # surfaced by the caller
        errors.append(exc)


def measure_throughput(ks: Sequence[int] = (1, 2, 3, 4), frames: int = 2000, objects: int = 10,
                       query="OBJECT Car", window="COUNT 5", schema=None, runs: int = 1,
                       seed: int = 7, engine_factory=None) -> List[Dict[str, Any]]:
    """Aggregate ingest rate with ``k`` concurrent publisher lanes.

    Frames are generated up front so only engine work is timed. Each lane runs
    in its own thread with one object query. With several runs the median rate
    is reported.
    """
    from .engine import Engine
    from .ontology import traffic_schema
    from .scenarios import ScenarioSpec, generate_scenario

    schema = schema or traffic_schema()
    factory = engine_factory or (lambda: Engine(schema))
    streams = {}
    for i in range(max(ks)):
        spec = ScenarioSpec("multi_object_noise", seed=seed + i, frames=frames,
                            params={"objects": objects, "p": 0, "stream_id": f"T{i + 1}"})
        streams[f"T{i + 1}"] = generate_scenario(spec)[0]
    curve = []
    for k in ks:
        if k < 1:
            raise ValueError("k must be at least 1")
        rates = []
        for _ in range(runs):
            engine = factory()
            delivered = [0]

            def sink(note, box=delivered):
                box[0] += 1

            engine.subscribe("bench", sink)
            pids = list(streams)[:k]
            for pid in pids:
                engine.add_publisher(pid)
                engine.register_query(f"QUERY q_{pid} SUBSCRIBER bench {query} WINDOW {window} FROM {pid}")
            errors: List[BaseException] = []
            threads = [threading.Thread(target=_drive, args=(engine, pid, streams[pid], errors))
                       for pid in pids]
            t0 = time.perf_counter()
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            elapsed = time.perf_counter() - t0
            if errors:
                raise errors[0]
            rates.append(k * frames / elapsed)
        curve.append({"streams": k, "frames": k * frames, "objects_per_frame": objects,
                      "fps": round(statistics.median(rates), 1)})
    return curve
