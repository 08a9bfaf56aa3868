"""Complex event processing over object-detection streams.

Frames become per-frame knowledge graphs, subscriber queries are matched over
windowed stream states, and matches are delivered as notifications.
"""

from .bench import compute_f1, measure_latency, measure_throughput
from .config import load_engine_config, load_schema, loads_engine_config, loads_schema
from .engine import Engine, Notification, State
from .frames import Detection, FrameRecord, parse_frames, write_frames
from .graph import MEKG, GraphStream, ObjectNode, RelationEdge, build_mekg, nodes_by_class
from .ontology import OntologySchema, traffic_schema
from .query import Query, WindowSpec, parse_query
from .rules import RuleMatch, eval_overtake, eval_parking, eval_pattern, parse_rule
from .scenarios import GroundTruth, ScenarioSpec, generate_scenario
from .spatial import LineSegment, Point, Rect, bsf, de9im, msf
from .temporal import AllenRelation, Interval, allen
from .tracking import GreedyTracker, track_associate

__version__ = "0.1.0"

__all__ = [
    "AllenRelation",
    "Detection",
    "Engine",
    "FrameRecord",
    "GraphStream",
    "GreedyTracker",
    "GroundTruth",
    "Interval",
    "LineSegment",
    "MEKG",
    "Notification",
    "ObjectNode",
    "OntologySchema",
    "Point",
    "Query",
    "Rect",
    "RelationEdge",
    "RuleMatch",
    "ScenarioSpec",
    "State",
    "WindowSpec",
    "allen",
    "bsf",
    "build_mekg",
    "compute_f1",
    "de9im",
    "eval_overtake",
    "eval_parking",
    "eval_pattern",
    "generate_scenario",
    "load_engine_config",
    "load_schema",
    "loads_engine_config",
    "loads_schema",
    "measure_latency",
    "measure_throughput",
    "msf",
    "nodes_by_class",
    "parse_frames",
    "parse_query",
    "parse_rule",
    "track_associate",
    "traffic_schema",
    "write_frames",
]
