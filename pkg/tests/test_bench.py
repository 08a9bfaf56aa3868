from fractions import Fraction

import pytest

from mmcep.bench import compute_f1, frame_f1, match_count, measure_latency, measure_throughput, summarize
from mmcep.engine import Engine
from mmcep.errors import RangeMismatch
from mmcep.ontology import traffic_schema
from mmcep.scenarios import ScenarioSpec, generate_scenario
from oracles import f1_from_counts, oracle_state_f1

SCHEMA = traffic_schema()


def run_query(frames, query):
    e = Engine(SCHEMA)
    e.add_publisher("P1")
    e.register_query(query)
    notes = []
    e.subscribe("s", notes.append)
    for f in frames:
        e.ingest_frame("P1", f)
    return e, notes


def noise(seed=0, p=0.2, frames=125):
    return generate_scenario(ScenarioSpec("multi_object_noise", seed=seed, frames=frames,
                                          params={"p": p, "stream_id": "P1"}))


@pytest.mark.parametrize("seed", range(5))
def test_f1_matches_oracle(seed):
    frames, gt = noise(seed)
    _, notes = run_query(frames, "QUERY q SUBSCRIBER s OBJECT Car WINDOW COUNT 5 FROM P1")
    scores = compute_f1(notes, gt, 5, label="Car", schema=SCHEMA)
    assert len(scores) == 25
    assert [s.f1 for s in scores] == oracle_state_f1(frames, gt, 5, {"Car"})


def test_perfect_and_missed():
    frames, gt = noise(p=0)
    _, notes = run_query(frames, "QUERY q SUBSCRIBER s OBJECT Vehicle WINDOW COUNT 5 FROM P1")
    assert {s.f1 for s in compute_f1(notes, gt, 5, label="Vehicle", schema=SCHEMA)} == {1}
    assert {s.f1 for s in compute_f1([], gt, 5, label="Vehicle", schema=SCHEMA)} == {0}


def test_stray_timestamps_rejected():
    frames, gt = noise(frames=20)
    _, notes = run_query(frames, "QUERY q SUBSCRIBER s OBJECT Car WINDOW COUNT 5 FROM P1")
    short = type(gt)(gt.events, gt.presence[:10], gt.meta)
    with pytest.raises(RangeMismatch):
        compute_f1(notes, short, 5, label="Car")


def test_frame_f1_against_counts():
    for n_pred in range(5):
        for n_true in range(5):
            for tp in range(min(n_pred, n_true) + 1):
                assert frame_f1(n_pred, n_true, tp) == f1_from_counts(n_pred, n_true, tp)
    assert frame_f1(0, 0, 0) == Fraction(1)


def test_match_count_is_one_to_one():
    box = ("Car", (0, 0, 10, 10))
    assert match_count([box, box], [box]) == 1
    assert match_count([box], [("Bike", (0, 0, 10, 10))]) == 0
    assert match_count([("Car", (6, 0, 10, 10))], [box]) == 0


def test_latency_summary():
    frames, _ = noise(frames=50)
    e, _ = run_query(frames, "QUERY q SUBSCRIBER s OBJECT Car WINDOW COUNT 5 FROM P1")
    report = measure_latency(e, "q")
    assert len(report.series) == 10
    assert all(v > 0 for v in report.series)
    assert report.median <= report.p99
    assert summarize([]).median == 0.0


@pytest.mark.slow
def test_throughput_curve_shape():
    curve = measure_throughput((1, 2, 3, 4), frames=300)
    assert [p["streams"] for p in curve] == [1, 2, 3, 4]
    assert all(p["fps"] > 0 for p in curve)


@pytest.mark.slow
def test_heavier_frames_are_not_faster():
    light = measure_throughput((1,), frames=300, objects=5, runs=5)[0]["fps"]
    heavy = measure_throughput((1,), frames=300, objects=20, runs=5)[0]["fps"]
    assert heavy <= light
