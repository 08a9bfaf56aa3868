"""Greedy IoU track association between consecutive frames."""

from __future__ import annotations

from typing import Iterable, List, Optional

from .frames import Detection, FrameRecord
from .spatial import Rect, iou

DEFAULT_IOU_THRESHOLD = 0.3


class GreedyTracker:
    """Online tracker: each frame is matched only against the previous one.

    Within a class, candidate (previous, current) pairs are taken in order of
    descending IoU and accepted while both sides are free and IoU reaches the
    threshold. Detections that arrive with a track id keep it.
    """

    def __init__(self, iou_threshold: float = DEFAULT_IOU_THRESHOLD):
        if not 0 < iou_threshold < 1:
            raise ValueError(f"IoU threshold {iou_threshold} outside (0, 1)")
        self.iou_threshold = iou_threshold
        self._previous: List[Detection] = []
        self._used = set()
        self._next = 1

    def _fresh(self):
        while self._next in self._used:
            self._next += 1
        tid = self._next
        self._next += 1
        self._used.add(tid)
        return tid

    def update(self, detections: Iterable[Detection]) -> List[Detection]:
        dets = list(detections)
        assigned: List[Optional[object]] = [d.track_id for d in dets]
        taken = {t for t in assigned if t is not None}
        self._used.update(taken)

        pending = [i for i, t in enumerate(assigned) if t is None]
        if pending and self._previous:
            boxes = [Rect(*d.bbox) for d in dets]
            prev_boxes = [Rect(*p.bbox) for p in self._previous]
            pairs = []
            for i in pending:
                for j, prev in enumerate(self._previous):
                    if prev.cls != dets[i].cls or prev.track_id in taken:
                        continue
                    score = iou(boxes[i], prev_boxes[j])
                    if score >= self.iou_threshold:
                        pairs.append((-score, i, j))
            pairs.sort()
            used_prev = set()
            for _, i, j in pairs:
                if assigned[i] is not None or j in used_prev:
                    continue
                tid = self._previous[j].track_id
                if tid in taken:
                    continue
                assigned[i] = tid
                taken.add(tid)
                used_prev.add(j)

        out = []
        for d, tid in zip(dets, assigned):
            if tid is None:
                tid = self._fresh()
            out.append(d if d.track_id == tid else d.with_track(tid))
        self._previous = out
        return out


def track_associate(frames: Iterable[FrameRecord],
                    iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> List[FrameRecord]:
    tracker = GreedyTracker(iou_threshold)
    result = []
    for f in frames:
        dets = tuple(tracker.update(f.detections))
        result.append(FrameRecord(f.stream_id, f.frame_no, f.timestamp_ms, dets))
    return result
