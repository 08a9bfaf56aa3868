"""Deterministic synthetic detection streams with analytic ground truth.

Objects move at constant velocity along +x. Ground-truth event frames are
solved exactly from the trajectory parameters with rational arithmetic, never
read back from the generated detections.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Tuple

from .errors import InvalidSpec
from .frames import Detection, FrameRecord

KINDS = ("overtake", "follow_no_overtake", "parking_enter_exit", "multi_object_noise")
COLORS = ("black", "red", "white", "blue", "silver")
_SIZES = {"Car": (40, 20), "Bike": (20, 14), "Bus": (80, 28), "Person": (10, 24)}


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    seed: int = 0
    frames: int = 60
    fps: float = 25.0
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        if self.frames < 2:
            raise InvalidSpec("a scenario needs at least two frames")
        if not 0 < self.fps <= 1000:
            raise InvalidSpec(f"fps {self.fps} outside (0, 1000]")


@dataclass
class GroundTruth:
    events: List[Dict[str, Any]]
    presence: List[Dict[str, Any]]
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"meta": self.meta, "events": self.events, "presence": self.presence},
                          sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        raw = json.loads(text)
        return cls(raw["events"], raw["presence"], raw.get("meta", {}))

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "GroundTruth":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def timestamps(self) -> List[int]:
        return [p["timestamp_ms"] for p in self.presence]


def _clean(v):
    """Integral values as ints, everything else rounded for stable text."""
    if isinstance(v, Fraction):
        v = float(v)
    if isinstance(v, float):
        if v.is_integer():
            return int(v)
        return round(v, 4)
    return v


def _param(params, key, default, cast=float):
    if key in params:
        try:
            return cast(params[key])
        except (TypeError, ValueError):
            raise InvalidSpec(f"parameter {key}={params[key]!r} is not a {cast.__name__}") from None
    return default


def _exact(v) -> Fraction:
    return Fraction(str(v)) if isinstance(v, float) else Fraction(v)


def _bbox(cx, cy, w, h):
    return [_clean(cx - Fraction(w, 2)), _clean(cy - Fraction(h, 2)), _clean(w), _clean(h)]


def _timestamp(spec, k, t0):
    return t0 + int(round(k * 1000 / spec.fps))


class _Mover:
    def __init__(self, oid, cls, x0, v, y, size, attributes=None):
        self.oid, self.cls = oid, cls
        self.x0, self.v, self.y = _exact(x0), _exact(v), _exact(y)
        self.w, self.h = size
        self.attributes = attributes or {}

    def bbox(self, k):
        return _bbox(self.x0 + self.v * k, self.y, self.w, self.h)


def _render(spec, movers, rng, p, tracks, stream_id, t0):
    frames, presence = [], []
    for k in range(spec.frames):
        ts = _timestamp(spec, k, t0)
        objects, dets = [], []
        for m in movers:
            box = m.bbox(k)
            objects.append({"id": m.oid, "class": m.cls, "bbox": box, "attributes": dict(m.attributes)})
            dropped = p > 0 and rng.random() < p
            conf = round(0.6 + 0.4 * rng.random(), 3)
            if not dropped:
                dets.append(Detection(m.cls, tuple(box), dict(m.attributes), conf,
                                      m.oid if tracks else None))
        frames.append(FrameRecord(stream_id, k, ts, tuple(dets)))
        presence.append({"frame_no": k, "timestamp_ms": ts, "objects": objects})
    return frames, presence


def _pair_movers(spec, params, rng, overtaking):
    cls_a = str(params.get("class_a", "Car"))
    cls_b = str(params.get("class_b", "Bike"))
    size_a, size_b = _SIZES.get(cls_a, (30, 20)), _SIZES.get(cls_b, (30, 20))
    v2 = _param(params, "v2", rng.randint(1, 3))
    if overtaking:
        v1 = _param(params, "v1", v2 + rng.randint(1, 3))
    else:
        v1 = _param(params, "v1", v2 - rng.randint(0, 1) if v2 > 1 else v2)
    x1 = _param(params, "x1", 50)
    dv = _exact(v1) - _exact(v2)
    if overtaking and dv > 0:
        default_gap = rng.randint(int(math.ceil(dv)), max(int(dv * (spec.frames - 2)), int(math.ceil(dv))))
    else:
        default_gap = rng.randint(30, 120)
    x2 = _param(params, "x2", x1 + default_gap)
    lane = _param(params, "lane_gap", rng.choice((40, 50, 60)))
    y1 = _param(params, "y1", 100)
    movers = [
        _Mover(1, cls_a, x1, v1, y1, size_a, {"color": rng.choice(COLORS)} if cls_a == "Car" else {}),
        _Mover(2, cls_b, x2, v2, _exact(y1) + _exact(lane), size_b,
               {"color": rng.choice(COLORS)} if cls_a == "Car" and cls_b == "Car" else {}),
    ]
    return movers, dv


def _overtake(spec, params, rng):
    movers, dv = _pair_movers(spec, params, rng, True)
    o1, o2 = movers
    if o1.x0 >= o2.x0:
        raise InvalidSpec("the overtaking object must start behind the other")
    if dv <= 0:
        raise InvalidSpec("the overtaking object must be faster")
    crossing = (o2.x0 - o1.x0) / dv
    k = math.ceil(crossing)
    if k > spec.frames - 1:
        raise InvalidSpec(f"crossing at t={crossing} lies beyond the last frame {spec.frames - 1}")
    event = {"type": "overtake", "tracks": [1, 2], "overtaker": 1, "overtaken": 2,
             "crossing": str(crossing), "frame": k, "frame_range": [k - 1, k]}
    return movers, [event], {}


def _follow(spec, params, rng):
    movers, dv = _pair_movers(spec, params, rng, False)
    o1, o2 = movers
    if o1.x0 >= o2.x0:
        raise InvalidSpec("the following object must start behind the leader")
    if dv > 0 and (o2.x0 - o1.x0) / dv <= spec.frames - 1:
        raise InvalidSpec("the follower would catch up within the scenario")
    return movers, [], {}


def _parking(spec, params, rng):
    sx = _exact(_param(params, "slot_x", 200))
    sy = _exact(_param(params, "slot_y", 100))
    sw = _exact(_param(params, "slot_w", 60))
    sh = _exact(_param(params, "slot_h", 120))
    cw = _exact(_param(params, "car_w", 50))
    r = _exact(_param(params, "r", 0.5))
    v = _exact(_param(params, "v", rng.choice((1, 2))))
    x0 = _exact(_param(params, "x0", sx - cw - rng.randint(5, 20)))
    if not 0 < r <= 1:
        raise InvalidSpec(f"threshold {r} outside (0, 1]")
    if cw > sw:
        raise InvalidSpec("the car is wider than the slot")
    if v <= 0:
        raise InvalidSpec("the car must move forward")
    # Car shares the slot's rows, so the overlap ratio is overlap_x / slot_w.
    margin = r * sw
    if cw <= margin:
        raise InvalidSpec("the car can never cover enough of the slot")
    enter_edge, exit_edge = sx + margin - cw, sx + sw - margin
    q = (enter_edge - x0) / v
    k_in = math.floor(q) + 1 if q >= 0 else 0
    k_out = math.ceil((exit_edge - x0) / v)
    if k_in > spec.frames - 1:
        raise InvalidSpec("the car does not reach the occupancy threshold within the scenario")
    if k_out <= k_in:
        raise InvalidSpec("the car passes the slot within one frame")
    car = _Mover(1, "Car", 0, 0, sy + sh / 2, (cw, sh), {"color": rng.choice(COLORS)})
    car.x0, car.v = x0 + cw / 2, v
    events = [{"type": "SlotFull", "slot": "S1", "track": 1, "frame": k_in}]
    if k_out <= spec.frames - 1:
        events.append({"type": "SlotVacant", "slot": "S1", "track": 1, "frame": k_out})
    slot = [_clean(sx), _clean(sy), _clean(sw), _clean(sh)]
    return [car], events, {"slots": [["S1", slot]], "threshold": _clean(r)}


def _noise(spec, params, rng):
    n = _param(params, "objects", 10, int)
    classes = str(params.get("classes", "Car,Car,Bike,Person,Car")).split(",")
    v = _param(params, "v", 2)
    movers = []
    for i in range(n):
        cls = classes[i % len(classes)].strip()
        attrs = {"color": rng.choice(COLORS)} if cls in ("Car", "Bike") else {}
        movers.append(_Mover(i + 1, cls, rng.randint(0, 300), v, 20 + 30 * i,
                             _SIZES.get(cls, (30, 20)), attrs))
    return movers, [], {}


_BUILDERS = {
    "overtake": _overtake,
    "follow_no_overtake": _follow,
    "parking_enter_exit": _parking,
    "multi_object_noise": _noise,
}


def generate_scenario(spec: ScenarioSpec) -> Tuple[List[FrameRecord], GroundTruth]:
    params = dict(spec.params)
    rng = random.Random(spec.seed)
    movers, events, extra = _BUILDERS[spec.kind](spec, params, rng)
    default_p = 0.1 if spec.kind == "multi_object_noise" else 0.0
    p = _param(params, "p", default_p)
    if not 0 <= p < 1:
        raise InvalidSpec(f"drop probability {p} outside [0, 1)")
    tracks = str(params.get("tracks", "1")).lower() not in ("0", "false", "no")
    stream_id = str(params.get("stream_id", "P1"))
    t0 = _param(params, "t0", 0, int)
    frames, presence = _render(spec, movers, rng, p, tracks, stream_id, t0)
    for e in events:
        for key in ("frame",):
            if key in e:
                e["timestamp_ms"] = _timestamp(spec, e[key], t0)
    meta = {"kind": spec.kind, "seed": spec.seed, "frames": spec.frames, "fps": spec.fps,
            "params": {k: str(v) for k, v in sorted(params.items())}, "p": p}
    meta.update(extra)
    return frames, GroundTruth(events, presence, meta)
