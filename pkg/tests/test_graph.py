import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmcep.errors import AttributeDomainViolation, OutOfOrderTimestamp, UnknownAttribute, UnknownClass, ValidationError
from mmcep.graph import (
    MEKG,
    GraphStream,
    ObjectNode,
    RelationEdge,
    build_mekg,
    filter_by_attributes,
    nodes_by_class,
)
from mmcep.ontology import traffic_schema
from mmcep.spatial import Rect

SCHEMA = traffic_schema()


def det(cls, x=0, y=0, w=10, h=10, **attrs):
    return {"class": cls, "bbox": [x, y, w, h], "attributes": attrs, "confidence": 0.9}


def test_build_two_cars():
    g = build_mekg([det("Car"), det("Car", 20)], SCHEMA, 100)
    assert len(g.nodes) == 2 and g.edges == () and g.timestamp == 100
    assert g.nodes[1].geometry == Rect(20, 0, 10, 10)


def test_unknown_class_and_empty_frame():
    with pytest.raises(UnknownClass):
        build_mekg([det("Dragon")], SCHEMA, 0)
    assert len(build_mekg([], SCHEMA, 0).nodes) == 0


def test_attribute_domain_checked():
    with pytest.raises(AttributeDomainViolation):
        build_mekg([det("Car", color="plaid")], SCHEMA, 0)


def test_edges_validated():
    nodes = [ObjectNode(0, "Car", Rect(0, 0, 1, 1)), ObjectNode(1, "Bike", Rect(2, 0, 1, 1))]
    g = MEKG(0, nodes, [RelationEdge(0, 1, "Overtake")])
    assert len(g.edges) == 1
    with pytest.raises(ValidationError):
        MEKG(0, nodes, [RelationEdge(0, 0, "Overtake")])
    with pytest.raises(ValidationError):
        MEKG(0, nodes, [RelationEdge(0, 7, "Overtake")])
    with pytest.raises(ValidationError):
        MEKG(0, nodes, [RelationEdge(0, 1, "Car")])


def test_stream_ordering():
    s = GraphStream("P1")
    s.append(MEKG(0))
    assert len(s) == 1
    s.append(MEKG(100)).append(MEKG(133))
    assert s.timestamps() == [0, 100, 133]
    with pytest.raises(OutOfOrderTimestamp):
        s.append(MEKG(133))


def test_nodes_by_class_enrichment():
    g = build_mekg([det("Car"), det("Person", 30)], SCHEMA, 0)
    assert [n.cls for n in nodes_by_class(g, "Vehicle", SCHEMA)] == ["Car"]
    assert nodes_by_class(g, "Vehicle", SCHEMA, enrich=False) == []
    cars = build_mekg([det("Car", i * 20) for i in range(3)], SCHEMA, 0)
    assert len(nodes_by_class(cars, "Car", SCHEMA)) == 3
    assert nodes_by_class(cars, "Bike", SCHEMA) == []


def test_filter_by_attributes():
    g = build_mekg([det("Car", color="black"), det("Car", 20, color="red")], SCHEMA, 0)
    black = filter_by_attributes(g.nodes, {"color": "black"}, SCHEMA)
    assert [n.attributes["color"] for n in black] == ["black"]
    assert filter_by_attributes(g.nodes, {}) == list(g.nodes)
    with pytest.raises(UnknownAttribute):
        filter_by_attributes(g.nodes, {"mood": "calm"}, SCHEMA)
    assert filter_by_attributes([], {"mood": "calm"}, SCHEMA) == []


leaf = st.sampled_from(["Car", "Bike", "Bus", "Person"])
boxes = st.tuples(st.integers(0, 200), st.integers(0, 200), st.integers(1, 50), st.integers(1, 50))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(leaf, boxes), max_size=15))
def test_leaf_labels_partition_nodes(items):
    g = build_mekg([det(c, *b) for c, b in items], SCHEMA, 0)
    seen = []
    for label in ("Car", "Bike", "Bus", "Person"):
        seen += [n.node_id for n in nodes_by_class(g, label, SCHEMA)]
    assert sorted(seen) == [n.node_id for n in g.nodes]
    assert len(nodes_by_class(g, "Object", SCHEMA)) == len(g.nodes)
    assert build_mekg([det(c, *b) for c, b in items], SCHEMA, 0) == g


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 10_000), unique=True, min_size=1, max_size=30))
def test_stream_timestamps_strictly_increase(stamps):
    s = GraphStream("P")
    for t in stamps:
        try:
            s.append(MEKG(t))
        except OutOfOrderTimestamp:
            pass
    ts = s.timestamps()
    assert all(a < b for a, b in zip(ts, ts[1:]))
    assert ts[0] == stamps[0]
