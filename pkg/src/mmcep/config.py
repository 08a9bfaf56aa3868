"""Schema files and engine configuration files.

Schema file grammar (``#`` starts a comment, blank lines are ignored)::

    [classes]
    Name [< Parent] [: attr = {v1, v2, ...} ; attr = [lo, hi] ...]
    [relations]
    Name(RoleClassA, RoleClassB) -> rule_name [= rule body]
    [detectable]
    Class {, Class}
    [extractable]
    Class.attribute {, Class.attribute}

A parent must be declared before its children. ``rule_name`` is either a
built-in evaluator (``overtake``, ``parking``) or a user rule, defined by the
first relation that names it with an ``= body`` clause (see
:func:`mmcep.rules.parse_rule`).

Engine configuration files are INI files read with :mod:`configparser`; the
sections are documented in the README.
"""

from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .errors import SchemaSyntaxError, ValidationError
from .ontology import BUILTIN_RULES, NumericRange, OntologySchema, traffic_schema
from .rules import (
    DEFAULT_MAX_GAP,
    DEFAULT_PARKING_THRESHOLD,
    RuleSyntaxError,
    parse_rule,
)
from .spatial import DEFAULT_AXIS, Rect

_IDENT = r"[A-Za-z_][A-Za-z_0-9]*"
_SECTION = re.compile(r"^\[(\w+)\]$")
_CLASS = re.compile(rf"^(?P<name>{_IDENT})\s*(?:<\s*(?P<parent>{_IDENT}))?\s*(?::(?P<attrs>.*))?$")
_ATTR = re.compile(rf"^\s*(?P<name>{_IDENT})\s*=\s*(?P<domain>.+?)\s*$")
_RELATION = re.compile(
    rf"^(?P<name>{_IDENT})\s*\(\s*(?P<a>{_IDENT})\s*,\s*(?P<b>{_IDENT})\s*\)\s*->\s*"
    rf"(?P<rule>{_IDENT})\s*(?:=(?P<body>.*))?$"
)
_NUMBER = re.compile(r"^-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?$")
_SECTIONS = ("classes", "relations", "detectable", "extractable")


def _num(text):
    return int(text) if re.fullmatch(r"-?\d+", text) else float(text)


def _parse_domain(text, line, col):
    text = text.strip()
    if text.startswith("{") and text.endswith("}"):
        values = [v.strip() for v in text[1:-1].split(",")]
        if not all(re.fullmatch(_IDENT, v) for v in values):
            raise SchemaSyntaxError(f"bad enumeration {text}", line, col)
        return frozenset(values)
    if text.startswith("[") and text.endswith("]"):
        parts = [p.strip() for p in text[1:-1].split(",")]
        if len(parts) != 2 or not all(_NUMBER.match(p) for p in parts):
            raise SchemaSyntaxError(f"bad numeric range {text}", line, col)
        lo, hi = (_num(p) for p in parts)
        if lo > hi:
            raise SchemaSyntaxError(f"empty numeric range {text}", line, col)
        return NumericRange(lo, hi)
    raise SchemaSyntaxError(f"attribute domain must be {{...}} or [lo, hi], got {text!r}", line, col)


def _parse_attrs(text, line, col0):
    attrs = {}
    offset = 0
    for chunk in text.split(";"):
        base = col0 + offset
        col = base + (len(chunk) - len(chunk.lstrip()))
        offset += len(chunk) + 1
        if not chunk.strip():
            continue
        m = _ATTR.match(chunk)
        if not m:
            raise SchemaSyntaxError(f"expected 'attribute = domain', got {chunk.strip()!r}", line, col)
        if m.group("name") in attrs:
            raise SchemaSyntaxError(f"attribute {m.group('name')!r} declared twice", line, col)
        attrs[m.group("name")] = _parse_domain(m.group("domain"), line, base + m.start("domain"))
    return attrs


def loads_schema(text: str) -> OntologySchema:
    schema = OntologySchema()
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.split("#", 1)[0].rstrip()
        content = stripped.strip()
        if not content:
            continue
        col = len(stripped) - len(stripped.lstrip()) + 1
        m = _SECTION.match(content)
        if m:
            section = m.group(1)
            if section not in _SECTIONS:
                raise SchemaSyntaxError(f"unknown section [{section}]", lineno, col)
            continue
        if section is None:
            raise SchemaSyntaxError("entry outside of a section", lineno, col)
        try:
            _parse_entry(schema, section, content, lineno, col)
        except SchemaSyntaxError:
            raise
        except RuleSyntaxError as exc:
            body_col = col + content.index("=", content.index("->")) + 1
            raise SchemaSyntaxError(str(exc), lineno, body_col + exc.column) from exc
        except ValidationError as exc:
            raise SchemaSyntaxError(str(exc), lineno, col) from exc
    return schema


def _parse_entry(schema, section, content, lineno, col):
    if section == "classes":
        m = _CLASS.match(content)
        if not m:
            raise SchemaSyntaxError(f"bad class declaration {content!r}", lineno, col)
        attrs = {}
        if m.group("attrs") is not None:
            attrs = _parse_attrs(m.group("attrs"), lineno, col + m.start("attrs"))
        schema.register_class(m.group("name"), m.group("parent"), attrs)
    elif section == "relations":
        m = _RELATION.match(content)
        if not m:
            raise SchemaSyntaxError(f"bad relation declaration {content!r}", lineno, col)
        roles = (m.group("a"), m.group("b"))
        rule_name, body = m.group("rule"), m.group("body")
        if body is not None:
            if rule_name in schema.rules:
                raise SchemaSyntaxError(f"rule {rule_name!r} is already defined", lineno,
                                        col + m.start("rule"))
            for role in roles:
                schema._node(role)
            schema.register_rule(rule_name, parse_rule(rule_name, body, roles))
        schema.register_relation_class(m.group("name"), roles, rule_name)
    elif section == "detectable":
        names = [n.strip() for n in content.split(",") if n.strip()]
        schema.set_detectable(schema.detectable | set(names))
    elif section == "extractable":
        for item in content.split(","):
            item = item.strip()
            if not item:
                continue
            if "." not in item:
                raise SchemaSyntaxError(f"expected Class.attribute, got {item!r}", lineno,
                                        col + content.index(item))
            cls, attr = item.split(".", 1)
            schema.add_extractable(cls, attr)


def load_schema(path) -> OntologySchema:
    if str(path) == "builtin:traffic":
        return traffic_schema()
    with open(path, encoding="utf-8") as fh:
        return loads_schema(fh.read())


def _fmt_num(v):
    return repr(v)


def _fmt_domain(domain):
    if isinstance(domain, NumericRange):
        return f"[{_fmt_num(domain.lo)}, {_fmt_num(domain.hi)}]"
    return "{" + ", ".join(sorted(domain)) + "}"


def dumps_schema(schema: OntologySchema) -> str:
    lines = ["[classes]"]
    children: Dict[Optional[str], List[str]] = {}
    for node in schema.classes.values():
        children.setdefault(node.parent, []).append(node.name)
    stack = sorted(children.get(None, []), reverse=True)
    while stack:
        name = stack.pop()
        node = schema.classes[name]
        line = name if node.parent is None else f"{name} < {node.parent}"
        if node.attribute_schema:
            attrs = " ; ".join(f"{k} = {_fmt_domain(v)}" for k, v in sorted(node.attribute_schema.items()))
            line += f" : {attrs}"
        lines.append(line)
        stack.extend(sorted(children.get(name, []), reverse=True))
    lines.append("")
    lines.append("[relations]")
    defined = set(BUILTIN_RULES)
    for rel in sorted(schema.relations.values(), key=lambda r: r.name):
        line = f"{rel.name}({rel.role_classes[0]}, {rel.role_classes[1]}) -> {rel.rule_name}"
        rule = schema.rules.get(rel.rule_name)
        if rel.rule_name not in defined and rule is not None:
            line += f" = {rule.source}"
            defined.add(rel.rule_name)
        lines.append(line)
    lines.append("")
    lines.append("[detectable]")
    if schema.detectable:
        lines.append(", ".join(sorted(schema.detectable)))
    lines.append("")
    lines.append("[extractable]")
    if schema.extractable_attributes:
        lines.append(", ".join(f"{c}.{a}" for c, a in sorted(schema.extractable_attributes)))
    return "\n".join(lines) + "\n"


def save_schema(schema: OntologySchema, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_schema(schema))


# -- engine configuration ----------------------------------------------------------

@dataclass
class PublisherConfig:
    publisher_id: str
    source: str
    seed: int = 0
    frames: int = 100
    fps: float = 25.0
    params: Dict[str, str] = field(default_factory=dict)
    slots: Tuple[Tuple[str, Rect], ...] = ()

    @property
    def synthetic(self) -> Optional[str]:
        if self.source.startswith("synthetic:"):
            return self.source.split(":", 1)[1]
        return None


@dataclass
class EngineConfig:
    schema: str = "builtin:traffic"
    sink: str = "-"
    state_backend: Optional[str] = None
    default_window: str = "COUNT 5"
    enrichment: bool = True
    max_gap: int = DEFAULT_MAX_GAP
    parking_threshold: float = DEFAULT_PARKING_THRESHOLD
    iou_threshold: float = 0.3
    axis: Tuple[float, float] = DEFAULT_AXIS
    publishers: List[PublisherConfig] = field(default_factory=list)
    queries: List[str] = field(default_factory=list)
    base_dir: str = "."

    def resolve(self, path):
        if path is None or path == "-" or path.startswith("builtin:") or os.path.isabs(path):
            return path
        return os.path.join(self.base_dir, path)


def _parse_slots(text):
    slots = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.replace(",", " ").split()
        if len(parts) != 5:
            raise ValidationError(f"slot needs 'id x y w h', got {chunk!r}")
        slots.append((parts[0], Rect(*(_num(p) for p in parts[1:]))))
    return tuple(slots)


def _parse_params(text):
    params = {}
    for item in text.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        key, _, value = item.partition("=")
        params[key.strip()] = value.strip()
    return params


def loads_engine_config(text: str, base_dir: str = ".") -> EngineConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"engine config: {exc}") from exc
    cfg = EngineConfig(base_dir=base_dir)
    if parser.has_section("engine"):
        sec = parser["engine"]
        cfg.schema = sec.get("schema", cfg.schema)
        cfg.sink = sec.get("sink", cfg.sink)
        cfg.state_backend = sec.get("state_backend") or None
        cfg.default_window = sec.get("default_window", cfg.default_window)
        cfg.enrichment = sec.getboolean("enrichment", cfg.enrichment)
        cfg.max_gap = sec.getint("max_gap", cfg.max_gap)
        cfg.parking_threshold = sec.getfloat("parking_threshold", cfg.parking_threshold)
        cfg.iou_threshold = sec.getfloat("iou_threshold", cfg.iou_threshold)
        if "axis" in sec:
            fx, fy = (float(v) for v in sec["axis"].replace(",", " ").split())
            cfg.axis = (fx, fy)
    for name in parser.sections():
        if name.startswith("publisher:"):
            sec = parser[name]
            pid = name.split(":", 1)[1].strip()
            if "source" not in sec:
                raise ValidationError(f"[{name}] needs a source")
            cfg.publishers.append(PublisherConfig(
                publisher_id=pid,
                source=sec["source"],
                seed=sec.getint("seed", 0),
                frames=sec.getint("frames", 100),
                fps=sec.getfloat("fps", 25.0),
                params=_parse_params(sec.get("params", "")),
                slots=_parse_slots(sec.get("slots", "")),
            ))
        elif name not in ("engine", "queries"):
            raise ValidationError(f"engine config: unknown section [{name}]")
    if parser.has_section("queries"):
        cfg.queries = [v.strip() for _, v in parser.items("queries") if v.strip()]
    return cfg


def load_engine_config(path) -> EngineConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return loads_engine_config(text, os.path.dirname(os.path.abspath(path)))
