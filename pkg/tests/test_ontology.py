import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmcep.config import dumps_schema, loads_schema
from mmcep.errors import (
    CycleDetected,
    DuplicateClass,
    DuplicateRelation,
    MMCEPError,
    UnknownAttribute,
    UnknownParent,
    UnknownRule,
)
from mmcep.ontology import NumericRange, OntologySchema, traffic_schema


def test_register_vehicle_then_car():
    s = OntologySchema()
    s.register_class("Vehicle")
    s.register_class("Car", "Vehicle", {"color": {"black", "red", "white"}})
    assert sorted(s.classes) == ["Car", "Vehicle"]
    assert s.attribute_schema("Car")["color"] == frozenset({"black", "red", "white"})


def test_duplicate_class():
    s = OntologySchema().register_class("Car")
    with pytest.raises(DuplicateClass):
        s.register_class("Car")


def test_unknown_parent():
    with pytest.raises(UnknownParent):
        OntologySchema().register_class("Bike", "Vehicle")


def test_reparent_cycle_rejected():
    s = OntologySchema().register_class("A").register_class("B", "A").register_class("C", "B")
    with pytest.raises(CycleDetected):
        s.reparent("A", "C")
    s.reparent("C", "A")
    assert s.ancestors("C") == ("C", "A")


def test_is_subclass_examples():
    s = traffic_schema()
    assert s.is_subclass("Car", "Vehicle")
    assert s.is_subclass("Car", "Car")
    assert not s.is_subclass("Vehicle", "Car")


def test_expand_label_examples():
    s = OntologySchema().register_class("Object").register_class("Vehicle", "Object")
    s.register_class("Car", "Vehicle").register_class("Person", "Object")
    s.set_detectable({"Car"})
    assert s.expand_label("Vehicle") == {"Car"}
    assert s.expand_label("Car") == {"Car"}
    assert s.expand_label("Person") == frozenset()
    assert s.expand_label("Vehicle", enrich=False) == frozenset()


def test_relation_registry():
    s = traffic_schema()
    assert s.relations["Overtake"].role_classes == ("Vehicle", "Vehicle")
    assert s.relations["ParkingLotFull"].rule_name == "parking"
    with pytest.raises(UnknownRule):
        s.register_relation_class("Fly", ("Car", "Car"), "fly")
    with pytest.raises(DuplicateRelation):
        s.register_relation_class("Overtake", ("Car", "Car"), "overtake")


def test_attribute_inheritance_and_validation():
    s = traffic_schema()
    s.register_class("SUV", "Car", {"seats": [2, 9]})
    attrs = s.attribute_schema("SUV")
    assert "color" in attrs and attrs["seats"] == NumericRange(2, 9)
    s.validate_attributes("SUV", {"color": "red", "seats": 7})
    with pytest.raises(MMCEPError):
        s.validate_attributes("SUV", {"seats": 12})
    with pytest.raises(UnknownAttribute):
        s.add_extractable("Person", "color")


def test_frozen_schema_rejects_mutation():
    s = traffic_schema().freeze()
    with pytest.raises(MMCEPError):
        s.register_class("Truck", "Vehicle")


# -- properties over random hierarchies --------------------------------------------------

@st.composite
def hierarchies(draw):
    n = draw(st.integers(1, 12))
    parents = [None] + [draw(st.one_of(st.none(), st.integers(0, i - 1))) for i in range(1, n)]
    s = OntologySchema()
    for i, p in enumerate(parents):
        s.register_class(f"C{i}", None if p is None else f"C{p}")
    detect = draw(st.sets(st.integers(0, n - 1)))
    s.set_detectable({f"C{i}" for i in detect})
    return s


@settings(max_examples=150, deadline=None)
@given(hierarchies())
def test_subclass_is_partial_order(s):
    names = list(s.classes)
    for a in names:
        assert s.is_subclass(a, a)
        for b in names:
            if a != b and s.is_subclass(a, b):
                assert not s.is_subclass(b, a)
            for c in names:
                if s.is_subclass(a, b) and s.is_subclass(b, c):
                    assert s.is_subclass(a, c)


@settings(max_examples=150, deadline=None)
@given(hierarchies())
def test_expansion_within_detectable(s):
    for label in s.classes:
        exp = s.expand_label(label)
        assert exp <= s.detectable
        assert exp == {c for c in s.detectable if s.is_subclass(c, label)}
    for root in s.roots():
        subtree = {c for c in s.classes if s.is_subclass(c, root)}
        assert s.expand_label(root) == s.detectable & subtree


@settings(max_examples=100, deadline=None)
@given(hierarchies(), st.data())
def test_schema_round_trip(s, data):
    names = list(s.classes)
    cls = data.draw(st.sampled_from(names))
    s2 = OntologySchema()
    for name in names:
        node = s.classes[name]
        attrs = {"tone": {"dark", "light"}, "size": [0, 10.5]} if name == cls else {}
        s2.register_class(name, node.parent, attrs)
    s2.set_detectable(s.detectable)
    s2.add_extractable(cls, "tone")
    if len(names) >= 2:
        s2.register_relation_class("Near", (names[0], names[1]), "overtake")
    text = dumps_schema(s2)
    assert loads_schema(text) == s2
    assert dumps_schema(loads_schema(text)) == text


def test_traffic_schema_round_trip():
    s = traffic_schema()
    assert loads_schema(dumps_schema(s)) == s
