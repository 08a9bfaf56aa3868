"""Line-delimited frame records.

Each line is one compact JSON object with keys in this order::

    {"stream_id":..,"frame_no":..,"timestamp_ms":..,"detections":[
        {"class":..,"bbox":[x,y,w,h],"attributes":{..},"confidence":..,"track_id":..}, ...]}

Separators carry no whitespace, attribute keys are sorted, ``track_id`` is
``null`` when unknown and numbers keep their JSON type. A canonical line
decodes and re-encodes to the same bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, List, Mapping, Optional, Tuple

from .errors import OrderingViolation, ParseError

_DUMP = json.JSONEncoder(separators=(",", ":"), ensure_ascii=True, allow_nan=False).encode


@dataclass(frozen=True, slots=True)
class Detection:
    cls: str
    bbox: Tuple[float, float, float, float]
    attributes: Mapping[str, Any] = field(default_factory=dict)
    confidence: float = 1.0
    track_id: Optional[Any] = None

    def with_track(self, track_id) -> "Detection":
        return Detection(self.cls, self.bbox, self.attributes, self.confidence, track_id)


@dataclass(frozen=True, slots=True)
class FrameRecord:
    stream_id: str
    frame_no: int
    timestamp_ms: int
    detections: Tuple[Detection, ...] = ()

    @property
    def tracked(self) -> bool:
        return all(d.track_id is not None for d in self.detections)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _check_detection(raw, where):
    if not isinstance(raw, dict):
        raise ValueError(f"{where}: detection must be an object")
    cls = raw.get("class")
    if not isinstance(cls, str) or not cls:
        raise ValueError(f"{where}: missing class")
    bbox = raw.get("bbox")
    if not isinstance(bbox, list) or len(bbox) != 4 or not all(_is_num(v) for v in bbox):
        raise ValueError(f"{where}: bbox must be four numbers [x, y, w, h]")
    if bbox[2] < 0 or bbox[3] < 0:
        raise ValueError(f"{where}: bbox has negative extent {bbox}")
    attrs = raw.get("attributes", {})
    if not isinstance(attrs, dict):
        raise ValueError(f"{where}: attributes must be an object")
    conf = raw.get("confidence", 1.0)
    if not _is_num(conf) or not 0 <= conf <= 1:
        raise ValueError(f"{where}: confidence {conf!r} outside [0, 1]")
    track = raw.get("track_id")
    if track is not None and (isinstance(track, bool) or not isinstance(track, (int, str))):
        raise ValueError(f"{where}: track_id must be an integer or string")
    return Detection(cls, tuple(bbox), attrs, conf, track)


def decode_frame(line: str, lineno: int = 1) -> FrameRecord:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
    try:
        if not isinstance(raw, dict):
            raise ValueError("record must be an object")
        stream_id, frame_no, ts = raw.get("stream_id"), raw.get("frame_no"), raw.get("timestamp_ms")
        if not isinstance(stream_id, str):
            raise ValueError("stream_id must be a string")
        for name, value in (("frame_no", frame_no), ("timestamp_ms", ts)):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValueError(f"{name} must be an integer")
        dets = raw.get("detections", [])
        if not isinstance(dets, list):
            raise ValueError("detections must be a list")
        detections = tuple(_check_detection(d, f"detection {i}") for i, d in enumerate(dets))
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None
    return FrameRecord(stream_id, frame_no, ts, detections)


def encode_frame(record: FrameRecord) -> str:
    return _DUMP({
        "stream_id": record.stream_id,
        "frame_no": record.frame_no,
        "timestamp_ms": record.timestamp_ms,
        "detections": [
            {
                "class": d.cls,
                "bbox": list(d.bbox),
                "attributes": {k: d.attributes[k] for k in sorted(d.attributes)},
                "confidence": d.confidence,
                "track_id": d.track_id,
            }
            for d in record.detections
        ],
    })


def iter_frames(lines: Iterable[str]) -> Iterator[FrameRecord]:
    """Decode and order-check records; blank lines are skipped."""
    last = None
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        record = decode_frame(line, lineno)
        if last is not None and record.timestamp_ms <= last:
            raise OrderingViolation(
                f"timestamp {record.timestamp_ms} does not follow {last}", lineno
            )
        last = record.timestamp_ms
        yield record


def parse_frames(path) -> List[FrameRecord]:
    with open(path, encoding="utf-8") as fh:
        return list(iter_frames(fh))


def write_frames(path, records: Iterable[FrameRecord]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(encode_frame(r))
            fh.write("\n")
