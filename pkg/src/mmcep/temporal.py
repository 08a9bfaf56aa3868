"""Allen interval algebra and the logical expression layer of the event calculus."""

from __future__ import annotations

import operator
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, Mapping, Optional, Tuple, Union

from . import spatial
from .errors import ImproperInterval, TypeMismatch, UnboundVariable


@dataclass(frozen=True, slots=True)
class Interval:
    start: int
    end: int

    def __post_init__(self):
        if not self.start < self.end:
            raise ImproperInterval(f"interval [{self.start}, {self.end}] is not proper")

    @property
    def length(self):
        return self.end - self.start


class AllenRelation(str, Enum):
    BEFORE = "before"
    AFTER = "after"
    MEETS = "meets"
    MET_BY = "met_by"
    OVERLAPS = "overlaps"
    OVERLAPPED_BY = "overlapped_by"
    STARTS = "starts"
    STARTED_BY = "started_by"
    FINISHES = "finishes"
    FINISHED_BY = "finished_by"
    DURING = "during"
    CONTAINS = "contains"
    EQUALS = "equals"


_INVERSE = {
    AllenRelation.BEFORE: AllenRelation.AFTER,
    AllenRelation.MEETS: AllenRelation.MET_BY,
    AllenRelation.OVERLAPS: AllenRelation.OVERLAPPED_BY,
    AllenRelation.STARTS: AllenRelation.STARTED_BY,
    AllenRelation.FINISHES: AllenRelation.FINISHED_BY,
    AllenRelation.DURING: AllenRelation.CONTAINS,
    AllenRelation.EQUALS: AllenRelation.EQUALS,
}
_INVERSE.update({v: k for k, v in list(_INVERSE.items())})


def inverse(rel) -> AllenRelation:
    return _INVERSE[AllenRelation(rel)]


def allen(i1: Interval, i2: Interval) -> AllenRelation:
    """Relation of ``i1`` to ``i2`` from the endpoint comparisons."""
    for i in (i1, i2):
        if not isinstance(i, Interval):
            raise TypeMismatch(f"expected Interval, got {i!r}")
    s1, e1, s2, e2 = i1.start, i1.end, i2.start, i2.end
    if e1 < s2:
        return AllenRelation.BEFORE
    if e2 < s1:
        return AllenRelation.AFTER
    if e1 == s2:
        return AllenRelation.MEETS
    if e2 == s1:
        return AllenRelation.MET_BY
    if s1 == s2:
        if e1 == e2:
            return AllenRelation.EQUALS
        return AllenRelation.STARTS if e1 < e2 else AllenRelation.STARTED_BY
    if e1 == e2:
        return AllenRelation.FINISHES if s1 > s2 else AllenRelation.FINISHED_BY
    if s2 < s1 and e1 < e2:
        return AllenRelation.DURING
    if s1 < s2 and e2 < e1:
        return AllenRelation.CONTAINS
    return AllenRelation.OVERLAPS if s1 < s2 else AllenRelation.OVERLAPPED_BY


# -- expression tree ------------------------------------------------------------------

def _truth(value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, int) and value in (0, 1):
        return bool(value)
    raise TypeMismatch(f"expected a boolean, got {value!r}")


def _lookup(bindings: Mapping[str, Any], name: str):
    try:
        return bindings[name]
    except KeyError:
        raise UnboundVariable(f"variable {name!r} is not bound") from None


class EvalContext:
    """What expression leaves can see while a rule is being evaluated.

    ``frames`` are the state's frames (objects with ``timestamp`` and
    ``by_track``), ``offsets`` maps the relative frame indices used by leaves
    (``@0``, ``@1``) to absolute positions in ``frames``, and ``domains``
    supplies candidate values for ANY / EVERY.
    """

    def __init__(self, frames=(), offsets=(0,), domains=None, constants=None):
        self.frames = frames
        self.offsets = offsets
        self.domains = dict(domains or {})
        self.constants = dict(constants or {})

    def frame_index(self, at, bindings):
        if isinstance(at, str):
            idx = _lookup(bindings, at)
            if not isinstance(idx, int):
                raise TypeMismatch(f"frame variable {at!r} bound to {idx!r}")
            return idx
        return self.offsets[at]

    def geometry(self, name, at, bindings):
        value = self.constants[name] if name in self.constants else _lookup(bindings, name)
        if isinstance(value, (spatial.Rect, spatial.Point, spatial.LineSegment)):
            return value
        geometry = getattr(value, "geometry", None)
        if geometry is not None:
            return geometry
        if not self.frames:
            raise TypeMismatch(f"{name!r} is bound to {value!r} but no frames are in scope")
        node = self.frames[self.frame_index(at, bindings)].by_track(value)
        return None if node is None else node.geometry

    def interval(self, name, bindings):
        value = _lookup(bindings, name)
        if isinstance(value, Interval):
            return value
        stamps = [f.timestamp for f in self.frames if f.by_track(value) is not None]
        if len(stamps) < 2:
            return None
        return Interval(stamps[0], stamps[-1])

    def domain(self, name):
        try:
            return self.domains[name]
        except KeyError:
            raise TypeMismatch(f"no candidate domain named {name!r}") from None


class BoolExpr:
    def evaluate(self, bindings: Mapping[str, Any], ctx: EvalContext) -> bool:
        raise NotImplementedError

    def variables(self) -> frozenset:
        """Free variables of the expression."""
        return frozenset()


@dataclass(frozen=True)
class Const(BoolExpr):
    value: Any

    def evaluate(self, bindings, ctx):
        return _truth(self.value)


@dataclass(frozen=True)
class Bsf(BoolExpr):
    """Boolean spatial function between two bound objects at a frame offset."""

    predicate: str
    a: str
    b: str
    at: Union[int, str] = 0
    axis: Tuple[float, float] = spatial.DEFAULT_AXIS

    def evaluate(self, bindings, ctx):
        ga = ctx.geometry(self.a, self.at, bindings)
        gb = ctx.geometry(self.b, self.at, bindings)
        if ga is None or gb is None:
            return False
        return spatial.bsf(self.predicate, ga, gb, self.axis) == 1

    def variables(self):
        names = {self.a, self.b}
        if isinstance(self.at, str):
            names.add(self.at)
        return frozenset(names)


COMPARATORS: Dict[str, Callable[[Any, Any], bool]] = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "=": operator.eq,
    "!=": operator.ne,
}


@dataclass(frozen=True)
class MsfCompare(BoolExpr):
    """``msf(metric, a, b) <op> threshold``."""

    metric: str
    a: str
    b: str
    op: str
    threshold: float
    at: Union[int, str] = 0

    def __post_init__(self):
        if self.op not in COMPARATORS:
            raise TypeMismatch(f"unknown comparison {self.op!r}")

    def evaluate(self, bindings, ctx):
        ga = ctx.geometry(self.a, self.at, bindings)
        gb = ctx.geometry(self.b, self.at, bindings)
        if ga is None or gb is None:
            return False
        return COMPARATORS[self.op](spatial.msf(self.metric, ga, gb), self.threshold)

    def variables(self):
        names = {self.a, self.b}
        if isinstance(self.at, str):
            names.add(self.at)
        return frozenset(names)


@dataclass(frozen=True)
class AllenTest(BoolExpr):
    relation: AllenRelation
    a: str
    b: str

    def evaluate(self, bindings, ctx):
        ia, ib = ctx.interval(self.a, bindings), ctx.interval(self.b, bindings)
        if ia is None or ib is None:
            return False
        return allen(ia, ib) == AllenRelation(self.relation)

    def variables(self):
        return frozenset({self.a, self.b})


@dataclass(frozen=True)
class Not(BoolExpr):
    arg: BoolExpr

    def evaluate(self, bindings, ctx):
        return not _truth(self.arg.evaluate(bindings, ctx))

    def variables(self):
        return self.arg.variables()


@dataclass(frozen=True)
class _Binary(BoolExpr):
    left: BoolExpr
    right: BoolExpr

    def variables(self):
        return self.left.variables() | self.right.variables()

    def evaluate(self, bindings, ctx):
        a = _truth(self.left.evaluate(bindings, ctx))
        b = _truth(self.right.evaluate(bindings, ctx))
        return self.combine(a, b)


class And(_Binary):
    def evaluate(self, bindings, ctx):
        return _truth(self.left.evaluate(bindings, ctx)) and _truth(self.right.evaluate(bindings, ctx))


class Or(_Binary):
    def evaluate(self, bindings, ctx):
        return _truth(self.left.evaluate(bindings, ctx)) or _truth(self.right.evaluate(bindings, ctx))


class Nor(_Binary):
    @staticmethod
    def combine(a, b):
        return not (a or b)


class Xor(_Binary):
    @staticmethod
    def combine(a, b):
        return a != b


class Xnor(_Binary):
    @staticmethod
    def combine(a, b):
        return a == b


class Implies(_Binary):
    @staticmethod
    def combine(a, b):
        return (not a) or b


class Iff(_Binary):
    @staticmethod
    def combine(a, b):
        return a == b


@dataclass(frozen=True)
class AnyOf(BoolExpr):
    """There is a value of ``var`` in ``domain`` for which ``body`` holds."""

    var: str
    domain: str
    body: BoolExpr

    def evaluate(self, bindings, ctx):
        scope = dict(bindings)
        for value in ctx.domain(self.domain):
            scope[self.var] = value
            if _truth(self.body.evaluate(scope, ctx)):
                return True
        return False

    def variables(self):
        return self.body.variables() - {self.var}


@dataclass(frozen=True)
class EveryOf(BoolExpr):
    var: str
    domain: str
    body: BoolExpr

    def evaluate(self, bindings, ctx):
        scope = dict(bindings)
        for value in ctx.domain(self.domain):
            scope[self.var] = value
            if not _truth(self.body.evaluate(scope, ctx)):
                return False
        return True

    def variables(self):
        return self.body.variables() - {self.var}


def eval_bool_expr(expr: BoolExpr, bindings: Optional[Mapping[str, Any]] = None,
                   frame_context: Optional[EvalContext] = None) -> bool:
    ctx = frame_context if frame_context is not None else EvalContext()
    bindings = bindings or {}
    missing = expr.variables() - set(bindings) - set(ctx.constants)
    if missing:
        raise UnboundVariable(f"unbound variables: {', '.join(sorted(missing))}")
    return _truth(expr.evaluate(bindings, ctx))
