import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmcep.errors import QuerySyntaxError
from mmcep.query import ObjectSpec, RelationSpec, WindowSpec, parse_query, parse_window


def test_object_query():
    q = parse_query("QUERY q1 SUBSCRIBER s1 OBJECT Car WHERE color=black WINDOW COUNT 5 FROM P1")
    assert q.object_spec == (ObjectSpec("Car", (("color", "black"),)),)
    assert q.window == WindowSpec.count(5)
    assert q.publishers == ("P1",)
    assert q.relation_spec is None


def test_pattern_query_with_sliding_window():
    q = parse_query("QUERY q5 SUBSCRIBER s OBJECT Car OBJECT Bike PATTERN Overtake(Car, Bike) "
                    "WINDOW COUNT 5 SLIDE 1 FROM P1, P2")
    assert q.relation_spec == RelationSpec("Overtake", "Car", "Bike")
    assert q.window.slide == 1 and not q.window.tumbling
    assert q.publishers == ("P1", "P2")


def test_numeric_values_and_time_windows():
    q = parse_query("QUERY q SUBSCRIBER s OBJECT Car WHERE speed=30, color=red WINDOW TIME 1000 FROM P")
    assert q.object_spec[0].where == {"speed": 30, "color": "red"}
    assert parse_window("ABS 0 500") == WindowSpec.absolute(0, 500)


@pytest.mark.parametrize("text, column", [
    ("QUERY q SUBSCRIBER s FROM P", 22),
    ("QUERY q SUBSCRIBER s OBJECT Car WINDOW COUNT 0 FROM P", 40),
    ("QUERY q SUBSCRIBER s OBJECT Car WINDOW ABS 9 3 FROM P", 40),
    ("QUERY q SUBSCRIBER s OBJECT Car FROM", 37),
    ("QUERY q SUBSCRIBER s OBJECT Car FROM P extra", 40),
    ("QUERY q OBJECT Car FROM P", 9),
])
def test_syntax_errors_report_column(text, column):
    with pytest.raises(QuerySyntaxError) as info:
        parse_query(text)
    assert info.value.column == column


words = st.from_regex(r"[A-Za-z][A-Za-z0-9_]{0,5}", fullmatch=True).filter(
    lambda w: w.upper() not in {"QUERY", "SUBSCRIBER", "OBJECT", "WHERE", "PATTERN", "WINDOW",
                                "COUNT", "SLIDE", "TIME", "ABS", "FROM"})
windows = st.one_of(
    st.none(),
    st.builds(WindowSpec.count, st.integers(1, 50), st.integers(1, 50)),
    st.builds(WindowSpec.time, st.integers(1, 10**6)),
    st.integers(0, 1000).flatmap(lambda a: st.integers(a + 1, a + 1000).map(lambda b: WindowSpec.absolute(a, b))),
)


@settings(max_examples=200, deadline=None)
@given(words, words, st.lists(st.tuples(words, st.lists(st.tuples(words, st.one_of(words, st.integers(0, 99))),
                                                        max_size=2)), min_size=1, max_size=3),
       st.one_of(st.none(), st.tuples(words, words, words)), windows, st.lists(words, min_size=1, max_size=3))
def test_text_round_trip(qid, sid, objects, relation, window, pubs):
    text = f"QUERY {qid} SUBSCRIBER {sid} "
    text += " ".join(f"OBJECT {c}" + (" WHERE " + ",".join(f"{k}={v}" for k, v in ps) if ps else "")
                     for c, ps in objects)
    if relation:
        text += " PATTERN {}({},{})".format(*relation)
    if window:
        text += f" WINDOW {window.text()}"
    text += " FROM " + ",".join(pubs)
    q = parse_query(text)
    assert q.text() == text
    assert parse_query(q.text()) == q
    assert q.window == window
