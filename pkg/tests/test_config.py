import pytest

from mmcep.config import dumps_schema, load_engine_config, loads_engine_config, loads_schema
from mmcep.errors import SchemaSyntaxError, ValidationError
from mmcep.ontology import NumericRange
from mmcep.rules import PatternRule, Scope
from mmcep.spatial import Rect

SCHEMA = """
# a small ontology
[classes]
Object
Vehicle < Object
Car < Vehicle : color = {black, red} ; speed = [0, 200]
Region < Object

[relations]
Overtake(Vehicle, Vehicle) -> overtake
InZone(Car, Region) -> in_zone = frame: Inside(a, b)

[detectable]
Car, Region

[extractable]
Car.color
"""


def test_schema_text_parses():
    s = loads_schema(SCHEMA)
    assert s.ancestors("Car") == ("Car", "Vehicle", "Object")
    assert s.attribute_schema("Car")["speed"] == NumericRange(0, 200)
    assert s.detectable == {"Car", "Region"}
    assert ("Car", "color") in s.extractable_attributes
    rule = s.rules["in_zone"]
    assert isinstance(rule, PatternRule) and rule.scope is Scope.FRAME
    assert s.relations["InZone"].rule_name == "in_zone"


def test_schema_dump_is_stable():
    s = loads_schema(SCHEMA)
    text = dumps_schema(s)
    assert loads_schema(text) == s
    assert dumps_schema(loads_schema(text)) == text


@pytest.mark.parametrize("text, line, column", [
    ("[classes]\nCar < Ghost\n", 2, 1),
    ("[classes]\nCar : color = red\n", 2, 15),
    ("[shapes]\n", 1, 1),
    ("Car\n", 1, 1),
    ("[classes]\nCar\n  Car\n", 3, 3),
    ("[classes]\nCar : size = [1, 2] ; oops\n", 2, 23),
    ("[classes]\nCar : size = [5, 1]\n", 2, 14),
])
def test_schema_errors_carry_position(text, line, column):
    with pytest.raises(SchemaSyntaxError) as info:
        loads_schema(text)
    assert info.value.line == line
    assert info.value.column == column


def test_rule_body_error_points_into_body():
    text = "[classes]\nCar\n[relations]\nR(Car, Car) -> r = frame: Inside(a, b) AND\n"
    with pytest.raises(SchemaSyntaxError) as info:
        loads_schema(text)
    assert info.value.line == 4


ENGINE = """
[engine]
schema = builtin:traffic
default_window = COUNT 10 SLIDE 2
enrichment = false
axis = 0, 1

[publisher:P1]
source = frames.jsonl
slots = S1 0 0 10 10; S2 20 0 10 10

[publisher:P2]
source = synthetic:overtake
seed = 4
frames = 30
params = v1=3, v2=1

[queries]
a = QUERY a SUBSCRIBER s OBJECT Car FROM P1
"""


def test_engine_config_fields(tmp_path):
    path = tmp_path / "e.cfg"
    path.write_text(ENGINE)
    cfg = load_engine_config(path)
    assert cfg.default_window == "COUNT 10 SLIDE 2"
    assert cfg.enrichment is False
    assert cfg.axis == (0.0, 1.0)
    p1, p2 = cfg.publishers
    assert p1.slots == (("S1", Rect(0, 0, 10, 10)), ("S2", Rect(20, 0, 10, 10)))
    assert cfg.resolve(p1.source) == str(tmp_path / "frames.jsonl")
    assert p2.synthetic == "overtake" and p2.params == {"v1": "3", "v2": "1"}
    assert cfg.queries == ["QUERY a SUBSCRIBER s OBJECT Car FROM P1"]


@pytest.mark.parametrize("text", [
    "[mystery]\nx = 1\n",
    "[publisher:P1]\nseed = 1\n",
    "[publisher:P1]\nsource = a\nslots = S1 0 0 10\n",
    "not an ini file",
])
def test_engine_config_rejects(text):
    with pytest.raises(ValidationError):
        loads_engine_config(text)
