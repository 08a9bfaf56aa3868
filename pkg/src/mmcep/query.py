"""Subscriber queries and their line-oriented text form.

Grammar (keywords are case-insensitive)::

    query     = "QUERY" id "SUBSCRIBER" id { object } [ pattern ] [ window ] "FROM" id { "," id }
    object    = "OBJECT" Class [ "WHERE" attr "=" value { "," attr "=" value } ]
    pattern   = "PATTERN" Relation "(" ClassA "," ClassB ")"
    window    = "WINDOW" ( "COUNT" n [ "SLIDE" s ] | "TIME" ms | "ABS" t_m t_n )

At least one OBJECT or a PATTERN is required. Without a WINDOW clause the
engine default applies. Example::

    QUERY q5 SUBSCRIBER s5 PATTERN Overtake(Car,Bike) WINDOW COUNT 5 FROM P5
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Optional, Tuple

from .errors import QuerySyntaxError, ValidationError


@dataclass(frozen=True)
class WindowSpec:
    kind: str
    n: int = 0
    slide: int = 0
    duration_ms: int = 0
    t_m: int = 0
    t_n: int = 0

    def __post_init__(self):
        if self.kind == "count":
            if self.n < 1 or self.slide < 1:
                raise ValidationError(f"count window needs n >= 1 and slide >= 1, got {self.n}/{self.slide}")
        elif self.kind == "time":
            if self.duration_ms <= 0:
                raise ValidationError("time window needs a positive duration")
        elif self.kind == "abs":
            if not self.t_m < self.t_n:
                raise ValidationError(f"absolute window needs t_m < t_n, got [{self.t_m}, {self.t_n}]")
        else:
            raise ValidationError(f"unknown window kind {self.kind!r}")

    @classmethod
    def count(cls, n, slide=None):
        return cls("count", n=n, slide=n if slide is None else slide)

    @classmethod
    def time(cls, duration_ms):
        return cls("time", duration_ms=duration_ms)

    @classmethod
    def absolute(cls, t_m, t_n):
        return cls("abs", t_m=t_m, t_n=t_n)

    @property
    def tumbling(self):
        return self.kind == "count" and self.slide == self.n

    def text(self):
        if self.kind == "count":
            return f"COUNT {self.n}" + ("" if self.tumbling else f" SLIDE {self.slide}")
        if self.kind == "time":
            return f"TIME {self.duration_ms}"
        return f"ABS {self.t_m} {self.t_n}"


@dataclass(frozen=True)
class ObjectSpec:
    label: str
    predicates: Tuple[Tuple[str, Any], ...] = ()

    @property
    def where(self):
        return dict(self.predicates)


@dataclass(frozen=True)
class RelationSpec:
    relation: str
    role_a: str
    role_b: str


@dataclass(frozen=True)
class Query:
    query_id: str
    subscriber_id: str
    object_spec: Tuple[ObjectSpec, ...]
    relation_spec: Optional[RelationSpec]
    window: Optional[WindowSpec]
    publishers: Tuple[str, ...]

    def __post_init__(self):
        if not self.object_spec and self.relation_spec is None:
            raise ValidationError(f"query {self.query_id!r} asks for neither objects nor a relation")
        if not self.publishers:
            raise ValidationError(f"query {self.query_id!r} names no publisher")

    def text(self):
        parts = [f"QUERY {self.query_id} SUBSCRIBER {self.subscriber_id}"]
        for spec in self.object_spec:
            clause = f"OBJECT {spec.label}"
            if spec.predicates:
                clause += " WHERE " + ",".join(f"{k}={v}" for k, v in spec.predicates)
            parts.append(clause)
        if self.relation_spec:
            r = self.relation_spec
            parts.append(f"PATTERN {r.relation}({r.role_a},{r.role_b})")
        if self.window is not None:
            parts.append(f"WINDOW {self.window.text()}")
        parts.append("FROM " + ",".join(self.publishers))
        return " ".join(parts)


_TOKEN = re.compile(r"\s*(?:(?P<num>-?\d+(?:\.\d+)?(?![A-Za-z_]))|(?P<word>[A-Za-z_][\w.\-]*)|(?P<punct>[(),=]))")


class _Tokens:
    def __init__(self, text):
        self.text = text
        self.items = []
        pos = 0
        stripped = text.rstrip()
        while pos < len(stripped):
            m = _TOKEN.match(stripped, pos)
            if not m or m.end() == pos:
                raise QuerySyntaxError(f"unexpected character {stripped[pos]!r}", pos + 1)
            kind = m.lastgroup
            self.items.append((kind, m.group(kind), m.start(kind) + 1))
            pos = m.end()
        self.i = 0

    def peek_kw(self, word):
        if self.i < len(self.items):
            kind, value, _ = self.items[self.i]
            return kind == "word" and value.upper() == word
        return False

    def column(self):
        if self.i < len(self.items):
            return self.items[self.i][2]
        return len(self.text.rstrip()) + 1

    def expect_kw(self, word):
        if not self.peek_kw(word):
            raise QuerySyntaxError(f"expected {word}, found {self._found()}", self.column())
        self.i += 1

    def _found(self):
        if self.i < len(self.items):
            return repr(self.items[self.i][1])
        return "end of query"

    def take(self, kind, what):
        if self.i >= len(self.items) or self.items[self.i][0] != kind:
            raise QuerySyntaxError(f"expected {what}, found {self._found()}", self.column())
        value = self.items[self.i][1]
        self.i += 1
        return value

    def punct(self, p):
        if self.i < len(self.items) and self.items[self.i][:2] == ("punct", p):
            self.i += 1
            return True
        return False

    def expect(self, p):
        if not self.punct(p):
            raise QuerySyntaxError(f"expected {p!r}, found {self._found()}", self.column())

    def integer(self, what):
        col = self.column()
        value = self.take("num", what)
        if "." in value:
            raise QuerySyntaxError(f"{what} must be an integer", col)
        return int(value)

    def done(self):
        return self.i >= len(self.items)


def _value(tokens):
    if tokens.i < len(tokens.items):
        kind, value, _ = tokens.items[tokens.i]
        if kind == "num":
            tokens.i += 1
            return float(value) if "." in value else int(value)
    return tokens.take("word", "attribute value")


def parse_query(text: str) -> Query:
    tok = _Tokens(text)
    tok.expect_kw("QUERY")
    qid = tok.take("word", "query id")
    tok.expect_kw("SUBSCRIBER")
    sid = tok.take("word", "subscriber id")
    objects = []
    relation = None
    window = None
    while tok.peek_kw("OBJECT"):
        tok.i += 1
        label = tok.take("word", "object class")
        preds = []
        if tok.peek_kw("WHERE"):
            tok.i += 1
            while True:
                attr = tok.take("word", "attribute name")
                tok.expect("=")
                preds.append((attr, _value(tok)))
                if not tok.punct(","):
                    break
        objects.append(ObjectSpec(label, tuple(preds)))
    if tok.peek_kw("PATTERN"):
        tok.i += 1
        rel = tok.take("word", "relation name")
        tok.expect("(")
        a = tok.take("word", "role class")
        tok.expect(",")
        b = tok.take("word", "role class")
        tok.expect(")")
        relation = RelationSpec(rel, a, b)
    if not objects and relation is None:
        raise QuerySyntaxError(f"expected OBJECT or PATTERN, found {tok._found()}", tok.column())
    if tok.peek_kw("WINDOW"):
        tok.i += 1
        col = tok.column()
        try:
            if tok.peek_kw("COUNT"):
                tok.i += 1
                n = tok.integer("window size")
                slide = None
                if tok.peek_kw("SLIDE"):
                    tok.i += 1
                    slide = tok.integer("slide")
                window = WindowSpec.count(n, slide)
            elif tok.peek_kw("TIME"):
                tok.i += 1
                window = WindowSpec.time(tok.integer("duration"))
            elif tok.peek_kw("ABS"):
                tok.i += 1
                window = WindowSpec.absolute(tok.integer("t_m"), tok.integer("t_n"))
            else:
                raise QuerySyntaxError(f"expected COUNT, TIME or ABS, found {tok._found()}", tok.column())
        except QuerySyntaxError:
            raise
        except ValidationError as exc:
            raise QuerySyntaxError(str(exc), col) from None
    tok.expect_kw("FROM")
    pubs = [tok.take("word", "publisher id")]
    while tok.punct(","):
        pubs.append(tok.take("word", "publisher id"))
    if not tok.done():
        raise QuerySyntaxError(f"unexpected {tok._found()}", tok.column())
    return Query(qid, sid, tuple(objects), relation, window, tuple(pubs))


def parse_window(text: str) -> WindowSpec:
    """Parse a bare window clause such as ``COUNT 5 SLIDE 1``."""
    q = parse_query(f"QUERY _ SUBSCRIBER _ OBJECT _ WINDOW {text} FROM _")
    return q.window
