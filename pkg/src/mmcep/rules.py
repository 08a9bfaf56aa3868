"""Pattern rules evaluated over window states.

Two built-in evaluators cover overtaking (a back/front flip along the motion
axis between consecutive frames) and slot occupancy (overlap ratio above a
threshold). User rules are boolean expressions over role-bound tracks and are
run by :func:`eval_pattern`.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from . import spatial
from .errors import EmptyState, MissingTracks, UnknownRule, ValidationError
from .ontology import BUILTIN_RULES
from .spatial import DEFAULT_AXIS, MetricKind, Rect
from .temporal import (
    AllenRelation,
    AllenTest,
    And,
    AnyOf,
    BoolExpr,
    Bsf,
    COMPARATORS,
    Const,
    EvalContext,
    EveryOf,
    Iff,
    Implies,
    MsfCompare,
    Nor,
    Not,
    Or,
    Xnor,
    Xor,
)

DEFAULT_MAX_GAP = 2
DEFAULT_PARKING_THRESHOLD = 0.5


class Scope(str, Enum):
    FRAME = "frame"
    PAIR = "pair"
    WINDOW = "window"


@dataclass(frozen=True)
class PatternRule:
    name: str
    roles: Tuple[Tuple[str, str], ...]
    body: BoolExpr
    scope: Scope = Scope.FRAME
    symmetric: bool = False
    constants: Mapping[str, Any] = field(default_factory=dict, compare=False)
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "scope", Scope(self.scope))
        role_vars = {var for var, _ in self.roles}
        free = self.body.variables() - role_vars - set(self.constants)
        if free:
            raise ValidationError(f"rule {self.name!r} uses undeclared names: {sorted(free)}")
        if self.scope is not Scope.PAIR and _max_offset(self.body) > 0:
            raise ValidationError(f"rule {self.name!r} references @1 outside pair scope")


def _max_offset(expr) -> int:
    at = getattr(expr, "at", 0)
    best = at if isinstance(at, int) else 0
    for child in ("arg", "left", "right", "body"):
        sub = getattr(expr, child, None)
        if isinstance(sub, BoolExpr):
            best = max(best, _max_offset(sub))
    return best


@dataclass(frozen=True)
class OvertakeConfig:
    class_a: str = "Vehicle"
    class_b: str = "Vehicle"
    axis: Tuple[float, float] = DEFAULT_AXIS
    max_gap: int = DEFAULT_MAX_GAP


@dataclass(frozen=True)
class ParkingConfig:
    slots: Tuple[Tuple[str, Rect], ...]
    object_class: str = "Car"
    threshold: float = DEFAULT_PARKING_THRESHOLD

    def __post_init__(self):
        if not 0 < self.threshold <= 1:
            raise ValidationError(f"parking threshold {self.threshold} outside (0, 1]")
        for slot_id, rect in self.slots:
            if not rect.positive:
                raise ValidationError(f"slot {slot_id!r} has zero area")


@dataclass(frozen=True)
class RuleMatch:
    """One detected pattern instance.

    ``start_ms``/``end_ms`` are the timestamps of the first and last evidence
    frame (equal for single-frame evidence).
    """

    rule: str
    event: str
    bindings: Tuple[Tuple[str, Any], ...]
    start_ms: int
    end_ms: int
    detail: Mapping[str, Any] = field(default_factory=dict, compare=False)

    @property
    def bound(self) -> Dict[str, Any]:
        return dict(self.bindings)

    def key(self):
        return (self.rule, self.event, self.bindings, self.start_ms, self.end_ms)

    def to_record(self):
        return {
            "rule": self.rule,
            "event": self.event,
            "bindings": {k: v for k, v in self.bindings},
            "span": [self.start_ms, self.end_ms],
            "detail": dict(self.detail),
        }


def track_sort_key(track):
    return (type(track).__name__, track)


def _frames_of(state) -> Sequence:
    frames = getattr(state, "frames", state)
    frames = list(frames)
    if not frames:
        raise EmptyState("state has no frames")
    return frames


def _classes_for(label, schema, enrich=True):
    if schema is None:
        return frozenset({label})
    return schema.expand_label(label, enrich)


def _role_tracks(frames, classes):
    """Track ids of nodes in ``classes`` mapped to the frame indices they appear in."""
    seen: Dict[Any, List[int]] = {}
    for i, frame in enumerate(frames):
        for node in frame.nodes:
            if node.cls in classes:
                if node.track_id is None:
                    raise MissingTracks(
                        f"node {node.node_id} ({node.cls}) at t={frame.timestamp} has no track id"
                    )
                seen.setdefault(node.track_id, []).append(i)
    return seen


def _consecutive(indices_a, indices_b, max_gap):
    common = sorted(set(indices_a) & set(indices_b))
    for i, j in zip(common, common[1:]):
        if j - i - 1 <= max_gap:
            yield i, j


def eval_overtake(state, config: OvertakeConfig, schema=None) -> List[RuleMatch]:
    frames = _frames_of(state)
    tracks_a = _role_tracks(frames, _classes_for(config.class_a, schema))
    tracks_b = _role_tracks(frames, _classes_for(config.class_b, schema))
    axis = config.axis
    matches = []
    emitted = set()
    for ta in sorted(tracks_a, key=track_sort_key):
        for tb in sorted(tracks_b, key=track_sort_key):
            if ta == tb:
                continue
            for i, j in _consecutive(tracks_a[ta], tracks_b[tb], config.max_gap):
                fi, fj = frames[i], frames[j]
                b_i = spatial.bsf("back_axis", fi.by_track(ta).geometry, fi.by_track(tb).geometry, axis)
                b_j = spatial.bsf("back_axis", fj.by_track(ta).geometry, fj.by_track(tb).geometry, axis)
                if b_i == b_j:
                    continue
                key = (frozenset((ta, tb)), i, j)
                if key in emitted:
                    continue
                emitted.add(key)
                overtaker, overtaken = (ta, tb) if b_i == 1 else (tb, ta)
                matches.append(RuleMatch(
                    rule="overtake",
                    event="Overtake",
                    bindings=(("o1", ta), ("o2", tb)),
                    start_ms=fi.timestamp,
                    end_ms=fj.timestamp,
                    detail={
                        "back": [b_i, b_j],
                        "overtaker": overtaker,
                        "overtaken": overtaken,
                        "frames": [fi.frame_no, fj.frame_no],
                    },
                ))
    return matches


def slot_occupancy(frame, config: ParkingConfig, schema=None) -> Dict[str, Tuple[bool, Any, float]]:
    """Per slot: (occupied, occupying track or node id, best overlap ratio)."""
    classes = _classes_for(config.object_class, schema)
    candidates = [n for n in frame.nodes if n.cls in classes]
    result = {}
    for slot_id, slot in config.slots:
        best_ratio, best = 0.0, None
        for node in candidates:
            ratio = spatial.msf(MetricKind.OVERLAP_RATIO, slot, node.geometry)
            if ratio > best_ratio:
                best_ratio, best = ratio, node
        occupied = best_ratio > config.threshold
        who = None
        if best is not None:
            who = best.track_id if best.track_id is not None else f"node:{best.node_id}"
        result[slot_id] = (occupied, who if occupied else None, best_ratio)
    return result


def eval_parking(state, config: ParkingConfig, schema=None, previous=None) -> List[RuleMatch]:
    """SlotFull / SlotVacant events on occupancy transitions.

    ``previous`` is the frame just before the state; its occupancy is carried
    in so a slot already full at the window start does not fire again.
    """
    frames = _frames_of(state)
    if previous is not None:
        prior = slot_occupancy(previous, config, schema)
        last_ts = previous.timestamp
    else:
        prior = {slot_id: (False, None, 0.0) for slot_id, _ in config.slots}
        last_ts = None
    events = []
    for frame in frames:
        now = slot_occupancy(frame, config, schema)
        for slot_id, _ in config.slots:
            was, was_who, _ = prior[slot_id]
            is_, who, ratio = now[slot_id]
            if was == is_:
                continue
            event = "SlotFull" if is_ else "SlotVacant"
            obj = who if is_ else was_who
            events.append(RuleMatch(
                rule="parking",
                event=event,
                bindings=(("object", obj), ("slot", slot_id)),
                start_ms=last_ts if last_ts is not None else frame.timestamp,
                end_ms=frame.timestamp,
                detail={"ratio": round(ratio, 6), "threshold": config.threshold,
                        "frame": frame.frame_no},
            ))
        prior = now
        last_ts = frame.timestamp
    return events


def overtake_rule(class_a="Vehicle", class_b="Vehicle", axis=DEFAULT_AXIS) -> PatternRule:
    """The overtake pattern written as a generic rule body."""
    body = Not(Xnor(Bsf("back_axis", "o1", "o2", 0, axis), Bsf("back_axis", "o1", "o2", 1, axis)))
    return PatternRule("overtake", (("o1", class_a), ("o2", class_b)), body, Scope.PAIR, symmetric=True)


def eval_pattern(rule: PatternRule, state, schema, role_classes: Optional[Sequence[str]] = None,
                 max_gap: int = DEFAULT_MAX_GAP) -> List[RuleMatch]:
    if rule is None or not isinstance(rule, PatternRule):
        raise UnknownRule(f"not a pattern rule: {rule!r}")
    frames = _frames_of(state)
    labels = list(role_classes) if role_classes is not None else [lbl for _, lbl in rule.roles]
    role_vars = [var for var, _ in rule.roles]
    per_role = [_role_tracks(frames, _classes_for(lbl, schema)) for lbl in labels]

    domains: Dict[str, Any] = {"frames": range(len(frames))}
    if schema is not None:
        for cls in schema.classes:
            domains[cls] = _LazyDomain(frames, schema, cls)
    base_ctx = dict(frames=frames, domains=domains, constants=rule.constants)

    matches = []
    emitted = set()
    choices = [sorted(t, key=track_sort_key) for t in per_role]
    for combo in itertools.product(*choices):
        if len(set(combo)) != len(combo):
            continue
        bindings = dict(zip(role_vars, combo))
        appearances = [per_role[k][t] for k, t in enumerate(combo)]
        for offsets in _offsets(rule.scope, frames, appearances, max_gap):
            ctx = EvalContext(offsets=offsets, **base_ctx)
            if not rule.body.evaluate(bindings, ctx):
                continue
            first, last = frames[offsets[0]], frames[offsets[-1]]
            if rule.scope is Scope.WINDOW:
                first, last = frames[0], frames[-1]
            key = (frozenset(combo) if rule.symmetric else combo, first.timestamp, last.timestamp)
            if key in emitted:
                continue
            emitted.add(key)
            matches.append(RuleMatch(
                rule=rule.name,
                event=rule.name,
                bindings=tuple(zip(role_vars, combo)),
                start_ms=first.timestamp,
                end_ms=last.timestamp,
                detail={"frames": [frames[o].frame_no for o in offsets]},
            ))
    return matches


def _offsets(scope, frames, appearances, max_gap):
    if not appearances:
        present = range(len(frames))
    else:
        present = sorted(set.intersection(*(set(a) for a in appearances)))
    if scope is Scope.FRAME:
        for i in present:
            yield (i,)
    elif scope is Scope.PAIR:
        for i, j in zip(present, present[1:]):
            if j - i - 1 <= max_gap:
                yield (i, j)
    else:
        yield (0,)


class _LazyDomain:
    """Track ids of a class present anywhere in the window, computed on first use."""

    def __init__(self, frames, schema, cls):
        self._frames, self._schema, self._cls = frames, schema, cls
        self._values = None

    def __iter__(self):
        if self._values is None:
            wanted = self._schema.expand_label(self._cls)
            seen = {}
            for f in self._frames:
                for n in f.nodes:
                    if n.cls in wanted and n.track_id is not None:
                        seen.setdefault(n.track_id, None)
            self._values = sorted(seen, key=track_sort_key)
        return iter(self._values)


# -- rule body language ------------------------------------------------------------
#
#   rule    := ["symmetric"] scope ":" expr
#   scope   := "frame" | "pair" | "window"
#   expr    := impl { "IFF" impl }
#   impl    := disj [ "IMPLIES" impl ]
#   disj    := xdisj { ("OR" | "NOR") xdisj }
#   xdisj   := conj { ("XOR" | "XNOR") conj }
#   conj    := unary { "AND" unary }
#   unary   := "NOT" unary | ("ANY" | "EVERY") NAME "IN" NAME ":" unary | atom
#   atom    := "(" expr ")" | "TRUE" | "FALSE" | call [ CMP NUMBER ]
#   call    := NAME "(" arg "," arg ")" [ "@" (INT | NAME) ]
#   arg     := NAME | "rect" "(" num "," num "," num "," num ")" | "point" "(" num "," num ")"
#
# Spatial predicate names become boolean spatial tests, metric names must be
# compared against a number, lowercase Allen relation names test track
# lifespans. Roles are named ``a`` and ``b``.

_TOKEN = re.compile(
    r"\s*(?:(?P<num>-?\d+(?:\.\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op><=|>=|!=|[<>=(),:@]))"
)
_KEYWORDS = {"AND", "OR", "NOT", "NOR", "XOR", "XNOR", "IMPLIES", "IFF", "ANY", "EVERY", "IN",
             "TRUE", "FALSE"}
_ALLEN = {r.value for r in AllenRelation}
_METRICS = {m.value for m in MetricKind}


class RuleSyntaxError(ValidationError):
    def __init__(self, message, column):
        super().__init__(f"column {column}: {message}")
        self.column = column


class _RuleParser:
    def __init__(self, text):
        self.text = text
        self.tokens = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise RuleSyntaxError(f"unexpected character {text[pos]!r}", pos + 1)
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind) + 1))
            pos = m.end()
        self.i = 0
        self.constants: Dict[str, Any] = {}

    def peek(self, value=None):
        if self.i >= len(self.tokens):
            return None
        tok = self.tokens[self.i]
        if value is not None:
            if tok[0] == "name" and tok[1].upper() == value and value in _KEYWORDS | {"RECT", "POINT"}:
                return tok
            return tok if tok[1] == value else None
        return tok

    def take(self, value=None, kind=None):
        tok = self.peek()
        col = tok[2] if tok else len(self.text) + 1
        if tok is None:
            raise RuleSyntaxError(f"expected {value or kind}, reached end of rule", col)
        if value is not None and self.peek(value) is None:
            raise RuleSyntaxError(f"expected {value!r}, found {tok[1]!r}", col)
        if kind is not None and tok[0] != kind:
            raise RuleSyntaxError(f"expected {kind}, found {tok[1]!r}", col)
        self.i += 1
        return tok

    def keyword(self, word):
        if self.peek(word) is not None:
            self.i += 1
            return True
        return False

    def parse_rule(self):
        symmetric = False
        tok = self.take(kind="name")
        if tok[1] == "symmetric":
            symmetric = True
            tok = self.take(kind="name")
        try:
            scope = Scope(tok[1])
        except ValueError:
            raise RuleSyntaxError(f"unknown scope {tok[1]!r}", tok[2]) from None
        self.take(":")
        body = self.expr()
        if self.peek() is not None:
            t = self.peek()
            raise RuleSyntaxError(f"unexpected {t[1]!r}", t[2])
        return scope, symmetric, body

    def expr(self):
        node = self.impl()
        while self.keyword("IFF"):
            node = Iff(node, self.impl())
        return node

    def impl(self):
        node = self.disj()
        if self.keyword("IMPLIES"):
            return Implies(node, self.impl())
        return node

    def disj(self):
        node = self.xdisj()
        while True:
            if self.keyword("OR"):
                node = Or(node, self.xdisj())
            elif self.keyword("NOR"):
                node = Nor(node, self.xdisj())
            else:
                return node

    def xdisj(self):
        node = self.conj()
        while True:
            if self.keyword("XOR"):
                node = Xor(node, self.conj())
            elif self.keyword("XNOR"):
                node = Xnor(node, self.conj())
            else:
                return node

    def conj(self):
        node = self.unary()
        while self.keyword("AND"):
            node = And(node, self.unary())
        return node

    def unary(self):
        if self.keyword("NOT"):
            return Not(self.unary())
        for word, cls in (("ANY", AnyOf), ("EVERY", EveryOf)):
            if self.keyword(word):
                var = self.take(kind="name")[1]
                self.take("IN")
                domain = self.take(kind="name")[1]
                self.take(":")
                return cls(var, domain, self.unary())
        return self.atom()

    def number(self):
        return float(self.take(kind="num")[1])

    def arg(self):
        tok = self.take(kind="name")
        word = tok[1].lower()
        if word in ("rect", "point") and self.peek("(") is not None:
            self.take("(")
            nums = [self.number()]
            while self.peek(",") is not None:
                self.take(",")
                nums.append(self.number())
            self.take(")")
            want = 4 if word == "rect" else 2
            if len(nums) != want:
                raise RuleSyntaxError(f"{word} takes {want} numbers", tok[2])
            geom = Rect(*nums) if word == "rect" else spatial.Point(*nums)
            name = f"_{word}{len(self.constants)}"
            self.constants[name] = geom
            return name
        return tok[1]

    def atom(self):
        if self.peek("(") is not None:
            self.take("(")
            node = self.expr()
            self.take(")")
            return node
        if self.keyword("TRUE"):
            return Const(True)
        if self.keyword("FALSE"):
            return Const(False)
        tok = self.take(kind="name")
        name, col = tok[1], tok[2]
        self.take("(")
        a = self.arg()
        self.take(",")
        b = self.arg()
        self.take(")")
        at: Any = 0
        if self.peek("@") is not None:
            self.take("@")
            t = self.take()
            at = int(t[1]) if t[0] == "num" else t[1]
        if name in _METRICS:
            op = self.take(kind="op")
            if op[1] not in COMPARATORS:
                raise RuleSyntaxError(f"expected a comparison after {name}", op[2])
            return MsfCompare(name, a, b, op[1], self.number(), at)
        if name in _ALLEN:
            return AllenTest(AllenRelation(name), a, b)
        if name in spatial.SPATIAL_PREDICATES:
            return Bsf(name, a, b, at)
        raise RuleSyntaxError(f"unknown predicate {name!r}", col)


def parse_rule(name: str, text: str, role_classes: Sequence[str]) -> PatternRule:
    """Compile a rule body such as ``frame: DISTANCE(a, b) < 50``."""
    parser = _RuleParser(text)
    scope, symmetric, body = parser.parse_rule()
    roles = tuple(zip(("a", "b"), role_classes))
    return PatternRule(name, roles, body, scope, symmetric, parser.constants, source=text.strip())


def builtin_rule_names():
    return sorted(BUILTIN_RULES)
