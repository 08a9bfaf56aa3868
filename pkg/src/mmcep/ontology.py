"""Visual concept class hierarchy, relation classes and detection capabilities.

The schema is mutable while the engine is being configured and frozen once the
engine starts; frozen schemas are shared read-only between publisher lanes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, Mapping, Optional, Set, Tuple, Union

from .errors import (
    AttributeDomainViolation,
    CycleDetected,
    DuplicateClass,
    DuplicateRelation,
    MMCEPError,
    UnknownAttribute,
    UnknownClass,
    UnknownParent,
    UnknownRule,
)

BUILTIN_RULES = frozenset({"overtake", "parking"})


@dataclass(frozen=True)
class NumericRange:
    lo: float
    hi: float

    def __contains__(self, value: Any) -> bool:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return False
        return self.lo <= value <= self.hi


Domain = Union[FrozenSet[str], NumericRange]


def make_domain(spec: Any) -> Domain:
    """Coerce ``{"a", "b"}``, ``("a", "b")`` or ``(lo, hi)`` numbers into a domain."""
    if isinstance(spec, NumericRange):
        return spec
    if isinstance(spec, frozenset):
        return spec
    values = tuple(spec)
    if len(values) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
    ):
        lo, hi = values
        if lo > hi:
            raise ValueError(f"empty numeric range [{lo}, {hi}]")
        return NumericRange(lo, hi)
    if not all(isinstance(v, str) for v in values):
        raise ValueError(f"attribute domain must be strings or a numeric pair: {spec!r}")
    return frozenset(values)


@dataclass(frozen=True)
class ClassNode:
    name: str
    parent: Optional[str] = None
    attribute_schema: Mapping[str, Domain] = field(default_factory=dict)

    def __hash__(self):
        return hash((self.name, self.parent))


@dataclass(frozen=True)
class RelationClass:
    name: str
    role_classes: Tuple[str, str]
    rule_name: str
    arity: int = 2


class OntologySchema:
    """Class hierarchy plus the relation and detection-capability registries.

    ``rules`` maps rule names to user pattern rules; the built-in evaluators
    are registered under ``overtake`` and ``parking`` with a ``None`` body.
    """

    def __init__(self):
        self.classes: Dict[str, ClassNode] = {}
        self.relations: Dict[str, RelationClass] = {}
        self.detectable: Set[str] = set()
        self.extractable_attributes: Set[Tuple[str, str]] = set()
        self.rules: Dict[str, Any] = {name: None for name in sorted(BUILTIN_RULES)}
        self._frozen = False
        self._ancestors: Dict[str, Tuple[str, ...]] = {}
        self._expansions: Dict[Tuple[str, bool], FrozenSet[str]] = {}
        self._attr_cache: Dict[str, Dict[str, Domain]] = {}

    # -- configuration phase -------------------------------------------------

    def _check_mutable(self):
        if self._frozen:
            raise MMCEPError("schema is frozen; mutate only during configuration")

    def register_class(self, name, parent=None, attribute_schema=None):
        self._check_mutable()
        if name in self.classes:
            raise DuplicateClass(f"class {name!r} already registered")
        if parent is not None and parent not in self.classes:
            raise UnknownParent(f"parent {parent!r} of {name!r} is not registered")
        if name in self.relations:
            raise DuplicateClass(f"{name!r} is already a relation label")
        attrs = {k: make_domain(v) for k, v in (attribute_schema or {}).items()}
        self.classes[name] = ClassNode(name, parent, attrs)
        self._invalidate()
        return self

    def reparent(self, name, parent):
        """Move ``name`` under ``parent``; refuses updates that would form a cycle."""
        self._check_mutable()
        node = self._node(name)
        if parent is not None:
            if parent not in self.classes:
                raise UnknownParent(f"parent {parent!r} is not registered")
            cursor = parent
            while cursor is not None:
                if cursor == name:
                    raise CycleDetected(f"making {parent!r} the parent of {name!r} creates a cycle")
                cursor = self.classes[cursor].parent
        self.classes[name] = ClassNode(name, parent, node.attribute_schema)
        self._invalidate()
        return self

    def register_rule(self, name, rule):
        self._check_mutable()
        if name in self.rules:
            raise DuplicateRelation(f"rule {name!r} already registered")
        self.rules[name] = rule
        return self

    def register_relation_class(self, name, role_classes, rule_name):
        self._check_mutable()
        if name in self.relations:
            raise DuplicateRelation(f"relation {name!r} already registered")
        if name in self.classes:
            raise DuplicateRelation(f"{name!r} is already an object class")
        roles = tuple(role_classes)
        if len(roles) != 2:
            raise ValueError("relation classes are binary")
        for role in roles:
            self._node(role)
        if rule_name not in self.rules:
            raise UnknownRule(f"no pattern rule named {rule_name!r}")
        self.relations[name] = RelationClass(name, roles, rule_name)
        return self

    def set_detectable(self, names: Iterable[str]):
        self._check_mutable()
        names = set(names)
        for n in names:
            self._node(n)
        self.detectable = names
        self._invalidate()
        return self

    def add_extractable(self, cls, attribute):
        self._check_mutable()
        if attribute not in self.attribute_schema(cls):
            raise UnknownAttribute(f"{cls!r} has no attribute {attribute!r}")
        self.extractable_attributes.add((cls, attribute))
        return self

    def freeze(self):
        self._frozen = True
        return self

    @property
    def frozen(self):
        return self._frozen

    def _invalidate(self):
        self._ancestors.clear()
        self._expansions.clear()
        self._attr_cache.clear()

    # -- queries ---------------------------------------------------------------

    def _node(self, name) -> ClassNode:
        try:
            return self.classes[name]
        except KeyError:
            raise UnknownClass(f"class {name!r} is not registered") from None

    def ancestors(self, name) -> Tuple[str, ...]:
        """``name`` followed by its ancestors up to the root."""
        cached = self._ancestors.get(name)
        if cached is not None:
            return cached
        chain = []
        cursor = name
        while cursor is not None:
            chain.append(cursor)
            cursor = self._node(cursor).parent
        result = tuple(chain)
        self._ancestors[name] = result
        return result

    def is_subclass(self, a, b) -> bool:
        self._node(b)
        return b in self.ancestors(a)

    def expand_label(self, label, enrich=True) -> FrozenSet[str]:
        """Detectable classes that satisfy ``label``.

        With ``enrich=False`` the hierarchy is ignored and only an exact,
        directly detectable class matches.
        """
        key = (label, enrich)
        cached = self._expansions.get(key)
        if cached is not None:
            return cached
        self._node(label)
        if enrich:
            result = frozenset(c for c in self.detectable if label in self.ancestors(c))
        else:
            result = frozenset({label} & self.detectable)
        self._expansions[key] = result
        return result

    def attribute_schema(self, cls) -> Dict[str, Domain]:
        """Attributes declared on ``cls`` or inherited; nearer declarations win."""
        cached = self._attr_cache.get(cls)
        if cached is not None:
            return cached
        merged: Dict[str, Domain] = {}
        for name in reversed(self.ancestors(cls)):
            merged.update(self.classes[name].attribute_schema)
        self._attr_cache[cls] = merged
        return merged

    def validate_attributes(self, cls, attributes: Mapping[str, Any]):
        schema = self.attribute_schema(cls)
        for key, value in attributes.items():
            domain = schema.get(key)
            if domain is None:
                raise AttributeDomainViolation(f"{cls!r} has no attribute {key!r}")
            if value not in domain:
                raise AttributeDomainViolation(f"{value!r} is outside the domain of {cls}.{key}")

    def roots(self):
        return sorted(n for n, c in self.classes.items() if c.parent is None)

    def __eq__(self, other):
        if not isinstance(other, OntologySchema):
            return NotImplemented
        return (
            self.classes == other.classes
            and self.relations == other.relations
            and self.detectable == other.detectable
            and self.extractable_attributes == other.extractable_attributes
            and self.rules == other.rules
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"OntologySchema(classes={len(self.classes)}, relations={len(self.relations)}, "
            f"detectable={sorted(self.detectable)})"
        )


def traffic_schema() -> OntologySchema:
    """The small traffic ontology used by the examples and the synthetic scenarios."""
    colors = {"black", "red", "white", "blue", "silver", "green"}
    schema = OntologySchema()
    schema.register_class("Object")
    schema.register_class("Vehicle", "Object")
    schema.register_class("Car", "Vehicle", {"color": colors, "type": {"SUV", "sedan", "hatchback"}})
    schema.register_class("Bike", "Vehicle", {"color": colors})
    schema.register_class("Bus", "Vehicle")
    schema.register_class("Person", "Object")
    schema.register_class("Slot", "Object")
    schema.register_class("Region", "Object")
    schema.register_relation_class("Overtake", ("Vehicle", "Vehicle"), "overtake")
    schema.register_relation_class("ParkingLotFull", ("Car", "Slot"), "parking")
    schema.set_detectable({"Car", "Bike", "Bus", "Person"})
    schema.add_extractable("Car", "color")
    schema.add_extractable("Car", "type")
    return schema
