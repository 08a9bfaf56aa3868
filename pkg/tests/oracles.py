"""Independent reference implementations used only by the tests.

None of these call into the code under test beyond plain data types.
"""

from fractions import Fraction
from functools import lru_cache
from itertools import permutations

I, B, E = "I", "B", "E"
PARTS = (I, B, E)


# -- rasterized DE-9IM ---------------------------------------------------------------
#
# Integer rectangles have every edge on an integer grid line, so each grid vertex,
# each open unit edge and each open unit square lies entirely inside one part of
# each rectangle. Sampling a representative of each (vertex: integer coordinates,
# edge: one half-integer coordinate, square: both half-integer) and taking the
# largest sample dimension per part pair gives the exact matrix.

def _grid(lo, hi):
    """Doubled coordinates 2*lo-2 .. 2*hi+2, i.e. samples at half-integer steps."""
    return range(2 * lo - 2, 2 * hi + 3)


def _member(v2, lo, hi):
    """Position of doubled sample ``v2`` against the closed span [lo, hi]."""
    if 2 * lo < v2 < 2 * hi:
        return "open"
    if v2 == 2 * lo or v2 == 2 * hi:
        return "edge"
    return "out"


def classify(px2, py2, rect):
    """Part of an integer rect ``(x, y, w, h)`` containing the doubled sample point."""
    x, y, w, h = rect
    mx, my = _member(px2, x, x + w), _member(py2, y, y + h)
    if mx == "out" or my == "out":
        return E
    if mx == "open" and my == "open":
        return I
    return B


@lru_cache(maxsize=8192)
def raster_matrix(a, b):
    """DE-9IM as {(partA, partB): dim or None} by sampling the doubled grid."""
    lo = min(a[0], a[1], b[0], b[1])
    hi = max(a[0] + a[2], a[1] + a[3], b[0] + b[2], b[1] + b[3])
    xs = _grid(lo, hi)
    # a sample's 2-D part depends only on its per-axis memberships, so group equal rows
    xsig = {}
    for px in xs:
        key = (_member(px, a[0], a[0] + a[2]), _member(px, b[0], b[0] + b[2]), px % 2)
        xsig.setdefault(key, px)
    ysig = {}
    for py in xs:
        key = (_member(py, a[1], a[1] + a[3]), _member(py, b[1], b[1] + b[3]), py % 2)
        ysig.setdefault(key, py)
    dims = {(p, q): None for p in PARTS for q in PARTS}
    for px in xsig.values():
        for py in ysig.values():
            pa, pb = classify(px, py, a), classify(px, py, b)
            d = px % 2 + py % 2
            cur = dims[pa, pb]
            if cur is None or d > cur:
                dims[pa, pb] = d
    # exteriors are unbounded: always 2-dimensional where they meet
    dims[E, E] = 2
    return dims


def raster_code(a, b):
    m = raster_matrix(tuple(a), tuple(b))
    return "".join("F" if m[p, q] is None else str(m[p, q]) for p in PARTS for q in PARTS)


def _meets(m, p, q):
    return m[p, q] is not None


def raster_predicates(a, b):
    """Named relations derived from the sampled point sets."""
    m = raster_matrix(tuple(a), tuple(b))
    t = {(q, p): d for (p, q), d in m.items()}
    closure_meet = any(_meets(m, p, q) for p in (I, B) for q in (I, B))
    a_in_b = not _meets(m, I, E) and not _meets(m, B, E)
    b_in_a = not _meets(t, I, E) and not _meets(t, B, E)
    out = {
        "Disjoint": not closure_meet,
        "Intersect": closure_meet,
        "Touch": closure_meet and not _meets(m, I, I),
        "Within": a_in_b and _meets(m, I, I),
        "CoveredBy": a_in_b and closure_meet,
        "Contains": b_in_a and _meets(m, I, I),
        "Inside": a_in_b and not _meets(m, I, B) and not _meets(m, B, B),
        "Overlap": m[I, I] == 2 and _meets(m, I, E) and _meets(m, E, I),
    }
    return out


def raster_rcc8(a, b):
    """Every base relation that holds; a partition means exactly one."""
    p = raster_predicates(a, b)
    q = raster_predicates(b, a)
    equal = p["CoveredBy"] and q["CoveredBy"] and p["Intersect"]
    held = []
    if p["Disjoint"]:
        held.append("DC")
    if p["Touch"]:
        held.append("EC")
    if p["Overlap"]:
        held.append("PO")
    if equal:
        held.append("EQ")
    if p["Inside"]:
        held.append("NTPP")
    if p["CoveredBy"] and not p["Inside"] and not equal and p["Within"]:
        held.append("TPP")
    if q["Inside"]:
        held.append("NTPPi")
    if q["CoveredBy"] and not q["Inside"] and not equal and q["Within"]:
        held.append("TPPi")
    return held


# -- Allen ---------------------------------------------------------------------------

def allen_by_points(s1, e1, s2, e2):
    """Relation names whose defining endpoint conditions hold, checked one by one."""
    conds = {
        "before": e1 < s2,
        "after": e2 < s1,
        "meets": e1 == s2,
        "met_by": e2 == s1,
        "overlaps": s1 < s2 < e1 < e2,
        "overlapped_by": s2 < s1 < e2 < e1,
        "starts": s1 == s2 and e1 < e2,
        "started_by": s1 == s2 and e2 < e1,
        "finishes": e1 == e2 and s2 < s1,
        "finished_by": e1 == e2 and s1 < s2,
        "during": s2 < s1 and e1 < e2,
        "contains": s1 < s2 and e2 < e1,
        "equals": s1 == s2 and e1 == e2,
    }
    return [name for name, ok in conds.items() if ok]


# -- tracking ------------------------------------------------------------------------

def box_iou(a, b):
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return Fraction(inter, 1) / union if union else Fraction(0)


def optimal_assignment(prev, cur, threshold):
    """Best total-IoU one-to-one assignment by trying every permutation (small n only).

    Returns {cur_index: prev_index} for pairs at or above ``threshold``.
    """
    best, best_map = Fraction(-1), {}
    n = max(len(prev), len(cur))
    slots = list(range(n))
    for perm in permutations(slots, len(cur)):
        total, mapping = Fraction(0), {}
        for ci, pi in enumerate(perm):
            if pi < len(prev):
                s = box_iou(prev[pi], cur[ci])
                if s >= threshold:
                    total += s
                    mapping[ci] = pi
        if total > best:
            best, best_map = total, mapping
    return best_map


# -- F1 ------------------------------------------------------------------------------

def f1_from_counts(n_pred, n_true, tp):
    """Harmonic mean of precision and recall from raw counts."""
    if n_pred == 0 and n_true == 0:
        return Fraction(1)
    if tp == 0:
        return Fraction(0)
    p = Fraction(tp, n_pred)
    r = Fraction(tp, n_true)
    return 2 * p * r / (p + r)


def oracle_state_f1(frames, gt, window_n, classes):
    """Per-state F1 for object queries on lane-separated scenarios.

    Reported boxes are copied verbatim from the truth, so a true positive is an
    exact (class, box) match; counting is done with multisets.
    """
    from collections import Counter

    reported = {}
    for f in frames:
        reported[f.timestamp_ms] = Counter((d.cls, tuple(d.bbox)) for d in f.detections
                                           if d.cls in classes)
    scores = []
    rows = gt.presence
    for s in range(len(rows) // window_n):
        vals = []
        for row in rows[s * window_n:(s + 1) * window_n]:
            truth = Counter((o["class"], tuple(o["bbox"])) for o in row["objects"]
                            if o["class"] in classes)
            pred = reported.get(row["timestamp_ms"], Counter())
            tp = sum((truth & pred).values())
            vals.append(f1_from_counts(sum(pred.values()), sum(truth.values()), tp))
        scores.append(sum(vals, Fraction(0)) / len(vals))
    return scores


# -- overtake ------------------------------------------------------------------------

def crossing_transitions(frames, ta, tb, axis=(1, 0), max_gap=2):
    """(frame_no_i, frame_no_j) where the sign of the projected centroid gap flips.

    Uses only raw detection boxes; a zero gap counts as "not behind".
    """
    fx, fy = axis
    seen = []
    for f in frames:
        boxes = {d.track_id: d.bbox for d in f.detections}
        if ta in boxes and tb in boxes:
            (ax, ay, aw, ah), (bx, by, bw, bh) = boxes[ta], boxes[tb]
            gap = (Fraction(ax) + Fraction(aw) / 2 - Fraction(bx) - Fraction(bw) / 2) * Fraction(fx) + \
                  (Fraction(ay) + Fraction(ah) / 2 - Fraction(by) - Fraction(bh) / 2) * Fraction(fy)
            seen.append((f.frame_no, gap < 0))
    out = []
    for (i, bi), (j, bj) in zip(seen, seen[1:]):
        if j - i - 1 <= max_gap and bi != bj:
            out.append((i, j))
    return out
