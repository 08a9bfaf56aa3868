"""2-D spatial calculus over bounding boxes, points and segments.

Coordinates follow the image convention: x grows rightward, y grows downward.
The DE-9IM matrix is computed analytically. For rectangles and points the plane
is cut along every bounding coordinate of both geometries; inside each product
cell the interior/boundary/exterior membership is constant, so the dimension
of an intersection is the largest cell dimension carrying that membership pair.
Segments against rectangles are clipped parametrically with exact rationals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Tuple, Union

from .errors import BadGeometry, DegenerateGeometry, UndefinedPredicate, UnsupportedGeometryPair

INTERIOR, BOUNDARY, EXTERIOR = 0, 1, 2
_EMPTY = -1
_DIM_CHARS = {_EMPTY: "F", 0: "0", 1: "1", 2: "2"}


@dataclass(frozen=True, slots=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise BadGeometry(f"non-finite point ({self.x}, {self.y})")


@dataclass(frozen=True, slots=True)
class LineSegment:
    a: Point
    b: Point

    def __post_init__(self):
        if self.a == self.b:
            raise BadGeometry("segment endpoints coincide")


@dataclass(frozen=True, slots=True)
class Rect:
    """Axis-aligned box with top-left corner ``(x, y)`` and extent ``(w, h)``."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w >= 0 and self.h >= 0):
            raise BadGeometry(f"negative extent w={self.w}, h={self.h}")
        isfinite = math.isfinite
        if not (isfinite(self.x) and isfinite(self.y) and isfinite(self.w) and isfinite(self.h)):
            raise BadGeometry("non-finite rectangle")

    @property
    def x1(self):
        return self.x + self.w

    @property
    def y1(self):
        return self.y + self.h

    @property
    def area(self):
        return self.w * self.h

    @property
    def positive(self):
        return self.w > 0 and self.h > 0

    @classmethod
    def from_corners(cls, x0, y0, x1, y1):
        return cls(x0, y0, x1 - x0, y1 - y0)


Geometry = Union[Point, LineSegment, Rect]


class TopologicalRelation(str, Enum):
    DISJOINT = "Disjoint"
    TOUCH = "Touch"
    CONTAINS = "Contains"
    INTERSECT = "Intersect"
    WITHIN = "Within"
    COVERED_BY = "CoveredBy"
    CROSSES = "Crosses"
    OVERLAP = "Overlap"
    INSIDE = "Inside"


class Direction(str, Enum):
    FRONT = "front"
    BACK = "back"
    LEFT = "left"
    RIGHT = "right"


class MetricKind(str, Enum):
    DISTANCE = "DISTANCE"
    OVERLAP_AREA = "OVERLAP_AREA"
    OVERLAP_RATIO = "OVERLAP_RATIO"


DEFAULT_AXIS = (1.0, 0.0)


class DE9IMMatrix:
    """Intersection dimensions, rows = parts of A, columns = parts of B."""

    __slots__ = ("_dims",)

    def __init__(self, dims):
        self._dims = tuple(tuple(row) for row in dims)

    def __getitem__(self, key):
        row, col = key
        return self._dims[row][col]

    @property
    def code(self) -> str:
        return "".join(_DIM_CHARS[d] for row in self._dims for d in row)

    def transpose(self) -> "DE9IMMatrix":
        return DE9IMMatrix(zip(*self._dims))

    def matches(self, pattern: str) -> bool:
        """Match a 9-character pattern over ``T F * 0 1 2``."""
        for want, got in zip(pattern, self.code):
            if want == "*":
                continue
            if want == "T":
                if got == "F":
                    return False
            elif want != got:
                return False
        return True

    def __eq__(self, other):
        return isinstance(other, DE9IMMatrix) and self._dims == other._dims

    def __hash__(self):
        return hash(self._dims)

    def __repr__(self):
        return f"DE9IMMatrix({self.code!r})"


# -- geometry helpers ---------------------------------------------------------

def centroid(g: Geometry) -> Point:
    if isinstance(g, Rect):
        if not g.positive:
            raise DegenerateGeometry(f"{g} has zero area")
        return Point(g.x + g.w / 2, g.y + g.h / 2)
    if isinstance(g, Point):
        return g
    if isinstance(g, LineSegment):
        return Point((g.a.x + g.b.x) / 2, (g.a.y + g.b.y) / 2)
    raise TypeError(f"not a geometry: {g!r}")


def intersection_area(a: Rect, b: Rect) -> float:
    ox = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    oy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ox <= 0 or oy <= 0:
        return 0
    return ox * oy


def iou(a: Rect, b: Rect) -> float:
    inter = intersection_area(a, b)
    if inter == 0:
        return 0.0
    return inter / (a.w * a.h + b.w * b.h - inter)


# -- DE-9IM ---------------------------------------------------------------------

def _extent(g):
    if isinstance(g, Rect):
        return (g.x, g.x + g.w), (g.y, g.y + g.h)
    if isinstance(g, Point):
        return (g.x, g.x), (g.y, g.y)
    return None


def _axis_cells(coords):
    """1-D cells as ``(dim, lo, hi)``; points have ``lo == hi``."""
    cells = [(1, -math.inf, coords[0])]
    for i, c in enumerate(coords):
        cells.append((0, c, c))
        nxt = coords[i + 1] if i + 1 < len(coords) else math.inf
        cells.append((1, c, nxt))
    return cells


def _axis_class(cell, lo, hi):
    dim, a, b = cell
    if lo == hi:
        return "z" if dim == 0 and a == lo else "x"
    if dim == 0:
        if a == lo or a == hi:
            return "e"
        return "o" if lo < a < hi else "x"
    return "o" if lo <= a and b <= hi else "x"


def _part(cx, cy):
    if cx == "x" or cy == "x":
        return EXTERIOR
    if cx == "e" or cy == "e":
        return BOUNDARY
    return INTERIOR


def _cells_matrix(ea, eb):
    (axa, aya), (bxa, bya) = ea, eb
    xs = _axis_cells(sorted({*axa, *bxa}))
    ys = _axis_cells(sorted({*aya, *bya}))
    xa = [(_axis_class(c, *axa), _axis_class(c, *bxa), c[0]) for c in xs]
    ya = [(_axis_class(c, *aya), _axis_class(c, *bya), c[0]) for c in ys]
    dims = [[_EMPTY] * 3 for _ in range(3)]
    for ca_x, cb_x, dx in xa:
        for ca_y, cb_y, dy in ya:
            pa = _part(ca_x, ca_y)
            pb = _part(cb_x, cb_y)
            d = dx + dy
            if d > dims[pa][pb]:
                dims[pa][pb] = d
    return DE9IMMatrix(dims)


def _classify_point(px, py, x0, y0, x1, y1):
    if px < x0 or px > x1 or py < y0 or py > y1:
        return EXTERIOR
    if px == x0 or px == x1 or py == y0 or py == y1:
        return BOUNDARY
    return INTERIOR


def _segment_rect_matrix(seg: LineSegment, rect: Rect):
    if not rect.positive:
        raise UnsupportedGeometryPair("segment against a zero-area rectangle")
    F = Fraction
    ax, ay, bx, by = F(seg.a.x), F(seg.a.y), F(seg.b.x), F(seg.b.y)
    x0, y0 = F(rect.x), F(rect.y)
    x1, y1 = x0 + F(rect.w), y0 + F(rect.h)
    dx, dy = bx - ax, by - ay
    ts = {F(0), F(1)}
    for start, delta, lines in ((ax, dx, (x0, x1)), (ay, dy, (y0, y1))):
        if delta:
            for line in lines:
                t = (line - start) / delta
                if 0 < t < 1:
                    ts.add(t)
    ts = sorted(ts)

    def at(t):
        return _classify_point(ax + t * dx, ay + t * dy, x0, y0, x1, y1)

    dims = [[_EMPTY] * 3 for _ in range(3)]
    for i, t in enumerate(ts):
        seg_part = BOUNDARY if t in (0, 1) else INTERIOR
        p = at(t)
        dims[seg_part][p] = max(dims[seg_part][p], 0)
        if i + 1 < len(ts):
            p = at((t + ts[i + 1]) / 2)
            dims[INTERIOR][p] = 1
    dims[EXTERIOR] = [2, 1, 2]
    return DE9IMMatrix(dims)


def de9im(a: Geometry, b: Geometry) -> DE9IMMatrix:
    ea, eb = _extent(a), _extent(b)
    if ea is not None and eb is not None:
        if isinstance(a, Point) and isinstance(b, Point):
            raise UnsupportedGeometryPair("Point x Point")
        return _cells_matrix(ea, eb)
    if isinstance(a, LineSegment) and isinstance(b, Rect):
        return _segment_rect_matrix(a, b)
    if isinstance(a, Rect) and isinstance(b, LineSegment):
        return _segment_rect_matrix(b, a).transpose()
    raise UnsupportedGeometryPair(f"{type(a).__name__} x {type(b).__name__}")


def _is_segment_rect(a, b):
    return (isinstance(a, LineSegment) and isinstance(b, Rect)) or (
        isinstance(a, Rect) and isinstance(b, LineSegment)
    )


def _within(m: DE9IMMatrix) -> bool:
    return m[0, 0] != _EMPTY and m[0, 2] == _EMPTY and m[1, 2] == _EMPTY


def _covered_by(m: DE9IMMatrix) -> bool:
    meets = any(m[i, j] != _EMPTY for i in (0, 1) for j in (0, 1))
    return meets and m[0, 2] == _EMPTY and m[1, 2] == _EMPTY


def _disjoint(m: DE9IMMatrix) -> bool:
    return all(m[i, j] == _EMPTY for i in (0, 1) for j in (0, 1))


def _evaluate(rel: TopologicalRelation, m: DE9IMMatrix, a, b) -> bool:
    if rel is TopologicalRelation.DISJOINT:
        return _disjoint(m)
    if rel is TopologicalRelation.INTERSECT:
        return not _disjoint(m)
    if rel is TopologicalRelation.TOUCH:
        return m[0, 0] == _EMPTY and not _disjoint(m)
    if rel is TopologicalRelation.WITHIN:
        return _within(m)
    if rel is TopologicalRelation.COVERED_BY:
        return _covered_by(m)
    if rel is TopologicalRelation.CONTAINS:
        return _within(m.transpose())
    if rel is TopologicalRelation.INSIDE:
        return _within(m) and m[0, 1] == _EMPTY and m[1, 1] == _EMPTY
    if rel is TopologicalRelation.OVERLAP:
        return m[0, 0] == 2 and m[0, 2] != _EMPTY and m[2, 0] != _EMPTY
    if rel is TopologicalRelation.CROSSES:
        if not _is_segment_rect(a, b):
            raise UndefinedPredicate(
                f"Crosses needs a segment and a rectangle, got {type(a).__name__} x {type(b).__name__}"
            )
        if isinstance(a, LineSegment):
            return m[0, 0] != _EMPTY and m[0, 2] != _EMPTY
        return m[0, 0] != _EMPTY and m[2, 0] != _EMPTY
    raise UndefinedPredicate(str(rel))


def holds_topology(rel, a: Geometry, b: Geometry) -> bool:
    return _evaluate(TopologicalRelation(rel), de9im(a, b), a, b)


def rcc8(a: Geometry, b: Geometry) -> str:
    """Base RCC-8 relation: DC, EC, PO, EQ, TPP, NTPP, TPPi or NTPPi."""
    m = de9im(a, b)
    t = m.transpose()
    if _disjoint(m):
        return "DC"
    if m[0, 0] == _EMPTY:
        return "EC"
    a_in_b, b_in_a = _within(m), _within(t)
    if a_in_b and b_in_a:
        return "EQ"
    if a_in_b:
        return "NTPP" if m[0, 1] == _EMPTY and m[1, 1] == _EMPTY else "TPP"
    if b_in_a:
        return "NTPPi" if t[0, 1] == _EMPTY and t[1, 1] == _EMPTY else "TPPi"
    return "PO"


# -- direction ------------------------------------------------------------------

def _check_axis(axis):
    fx, fy = axis
    if fx == 0 and fy == 0:
        raise ValueError("front axis must be a non-zero vector")
    return fx, fy


def direction(a: Geometry, b: Geometry, axis=DEFAULT_AXIS) -> Optional[Direction]:
    """FORS region of ``a`` relative to ``b``; ``None`` when centroids coincide.

    The side vector is the front axis turned +90 degrees in image coordinates,
    so with front = +x, "right" points down the image.
    """
    fx, fy = _check_axis(axis)
    ca, cb = centroid(a), centroid(b)
    dx, dy = ca.x - cb.x, ca.y - cb.y
    if dx == 0 and dy == 0:
        return None
    along = dx * fx + dy * fy
    side = -dx * fy + dy * fx
    if abs(along) >= abs(side):
        return Direction.FRONT if along > 0 else Direction.BACK
    return Direction.LEFT if side < 0 else Direction.RIGHT


def projection(a: Geometry, b: Geometry, axis=DEFAULT_AXIS) -> float:
    """Signed offset of ``a``'s centroid ahead of ``b``'s along ``axis``."""
    fx, fy = _check_axis(axis)
    ca, cb = centroid(a), centroid(b)
    return (ca.x - cb.x) * fx + (ca.y - cb.y) * fy


# -- boolean and metric spatial functions ------------------------------------------

AXIS_TESTS = ("back_axis", "front_axis")


def bsf(predicate, a: Geometry, b: Geometry, axis=DEFAULT_AXIS) -> int:
    """1 when the named spatial relation holds between ``a`` and ``b``, else 0.

    ``predicate`` is a topological relation, a FORS direction, or one of the
    pure projections ``back_axis`` / ``front_axis`` (a strict sign test along
    the front axis; a zero projection is neither).
    """
    if predicate == "back_axis":
        return int(projection(a, b, axis) < 0)
    if predicate == "front_axis":
        return int(projection(a, b, axis) > 0)
    if isinstance(predicate, Direction) or predicate in _DIRECTION_NAMES:
        return int(direction(a, b, axis) == Direction(predicate))
    try:
        rel = TopologicalRelation(predicate)
    except ValueError:
        raise UndefinedPredicate(f"unknown spatial predicate {predicate!r}") from None
    return int(holds_topology(rel, a, b))


_DIRECTION_NAMES = {d.value for d in Direction}
SPATIAL_PREDICATES = frozenset(
    {r.value for r in TopologicalRelation} | _DIRECTION_NAMES | set(AXIS_TESTS)
)


def _area_of(g):
    if isinstance(g, Rect):
        return g
    raise UnsupportedGeometryPair(f"overlap metrics need rectangles, got {type(g).__name__}")


def msf(metric, a: Geometry, b: Geometry) -> float:
    metric = MetricKind(metric)
    if metric is MetricKind.DISTANCE:
        ca, cb = centroid(a), centroid(b)
        return math.hypot(ca.x - cb.x, ca.y - cb.y)
    ra, rb = _area_of(a), _area_of(b)
    inter = intersection_area(ra, rb)
    if metric is MetricKind.OVERLAP_AREA:
        return inter
    if ra.area == 0:
        raise DegenerateGeometry("overlap ratio against a zero-area reference")
    return inter / ra.area


def as_rect(bbox) -> Rect:
    x, y, w, h = bbox
    return Rect(x, y, w, h)


def rect_tuple(r: Rect) -> Tuple[float, float, float, float]:
    return (r.x, r.y, r.w, r.h)
