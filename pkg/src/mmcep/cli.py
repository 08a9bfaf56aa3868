"""Command line entry point.

Machine-readable records go to stdout (or the named file), human summaries
to stderr. Exit status: 0 success, 1 validation failure, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import bench
from .config import load_engine_config, load_schema
from .errors import MMCEPError, ValidationError
from .frames import parse_frames, write_frames
from .query import parse_query
from .runtime import build_engine, run
from .scenarios import KINDS, GroundTruth, ScenarioSpec, generate_scenario

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _dump(record):
    return json.dumps(record, separators=(",", ":"))


def _kv(items):
    params = {}
    for item in items or ():
        for part in item.split(","):
            key, sep, value = part.partition("=")
            if not sep or not key.strip():
                raise ValidationError(f"expected key=value, got {part!r}")
            params[key.strip()] = value.strip()
    return params


def _say(*parts):
    print(*parts, file=sys.stderr)


class _Output:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        self.fh = sys.stdout if self.path in (None, "-") else open(self.path, "w", encoding="utf-8", newline="\n")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not sys.stdout:
            self.fh.close()


def cmd_gen(args):
    spec = ScenarioSpec(args.scenario, seed=args.seed, frames=args.frames, fps=args.fps,
                        params=_kv(args.param))
    frames, gt = generate_scenario(spec)
    write_frames(args.out, frames)
    if args.gt:
        gt.save(args.gt)
    _say(f"{args.scenario}: {len(frames)} frames, {len(gt.events)} ground-truth events -> {args.out}")
    return EXIT_OK


def cmd_run(args):
    cfg = load_engine_config(args.config)
    backend = open(cfg.resolve(cfg.state_backend), "w", encoding="utf-8") if cfg.state_backend else None
    try:
        result = run(cfg, parallel=args.parallel, state_backend=backend)
    finally:
        if backend is not None:
            backend.close()
    target = args.notifications or cfg.resolve(cfg.sink)
    with _Output(target) as out:
        for line in result.lines(latency=not args.no_latency):
            out.write(line + "\n")
    engine = result.engine
    _say(f"{result.frames} frames, {engine.states_emitted} states, "
         f"{len(result.notifications)} notifications")
    return EXIT_OK


def cmd_bench_latency(args):
    cfg = load_engine_config(args.config)
    series = {}
    for _ in range(args.repeat):
        result = run(cfg)
        for qid, values in result.engine.latency_series().items():
            series.setdefault(qid, []).extend(values)
    for qid in sorted(series):
        report = bench.summarize(series[qid])
        print(_dump({"query_id": qid, **report.to_record()}))
        _say(f"{qid}: median {report.median:.1f} us, p99 {report.p99:.1f} us over {len(report.series)} states")
    return EXIT_OK


def cmd_bench_throughput(args):
    ks = [int(k) for k in args.streams.split(",") if k.strip()]
    factory = None
    if args.config:
        cfg = load_engine_config(args.config)
        cfg.publishers, cfg.queries = [], []
        factory = lambda: build_engine(cfg)[0]  # noqa: E731
    curve = bench.measure_throughput(ks, frames=args.frames, objects=args.objects,
                                     runs=args.runs, engine_factory=factory)
    for point in curve:
        print(_dump(point))
        _say(f"k={point['streams']}: {point['fps']:.0f} frames/s")
    return EXIT_OK


def cmd_score(args):
    gt = GroundTruth.load(args.gt)
    with open(args.notifications, encoding="utf-8") as fh:
        notes = [json.loads(line) for line in fh if line.strip()]
    schema = load_schema(args.schema) if args.schema else None
    label, predicates = args.label, _kv(args.where)
    if args.query:
        q = parse_query(args.query)
        if len(q.object_spec) != 1:
            raise ValidationError("scoring needs a query with exactly one OBJECT clause")
        label, predicates = q.object_spec[0].label, q.object_spec[0].where
        args.query_id = args.query_id or q.query_id
    scores = bench.compute_f1(notes, gt, args.window, label=label, predicates=predicates,
                              schema=schema, query_id=args.query_id)
    for s in scores:
        print(_dump(s.to_record()))
    if scores:
        mean = sum(float(s.f1) for s in scores) / len(scores)
        _say(f"{len(scores)} states, mean F1 {mean:.4f}")
    return EXIT_OK


def cmd_validate(args):
    checked = []
    if args.frames:
        frames = parse_frames(args.frames)
        checked.append(f"{args.frames}: {len(frames)} frames")
    if args.schema:
        load_schema(args.schema)
        checked.append(f"{args.schema}: schema ok")
    if args.config:
        cfg = load_engine_config(args.config)
        engine, feeds = build_engine(cfg)
        checked.append(f"{args.config}: {len(feeds)} publishers, {len(engine.queries)} queries")
    if args.query:
        parse_query(args.query)
        checked.append("query ok")
    if not checked:
        raise ValidationError("nothing to validate; pass --frames, --schema, --config or --query")
    for line in checked:
        _say(line)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="mmcep", description="Event matching over object-detection streams.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic frame file and its ground truth")
    g.add_argument("--scenario", required=True, choices=KINDS)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--frames", type=int, default=60)
    g.add_argument("--fps", type=float, default=25.0)
    g.add_argument("--param", action="append", metavar="K=V", help="scenario parameter, repeatable")
    g.add_argument("--out", required=True)
    g.add_argument("--gt")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="replay the publishers of an engine config")
    r.add_argument("--config", required=True)
    r.add_argument("--notifications", help="output path, '-' for stdout (default: config sink)")
    r.add_argument("--parallel", action="store_true", help="one thread per publisher")
    r.add_argument("--no-latency", action="store_true", help="omit latency fields")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="latency and throughput measurements")
    bsub = b.add_subparsers(dest="bench", required=True)
    bl = bsub.add_parser("latency")
    bl.add_argument("--config", required=True)
    bl.add_argument("--repeat", type=int, default=1)
    bl.set_defaults(func=cmd_bench_latency)
    bt = bsub.add_parser("throughput")
    bt.add_argument("--streams", default="1,2,3,4")
    bt.add_argument("--config")
    bt.add_argument("--frames", type=int, default=2000)
    bt.add_argument("--objects", type=int, default=10)
    bt.add_argument("--runs", type=int, default=1)
    bt.set_defaults(func=cmd_bench_throughput)

    s = sub.add_parser("score", help="per-state F1 of object notifications against ground truth")
    s.add_argument("--notifications", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--window", type=int, required=True)
    s.add_argument("--label")
    s.add_argument("--where", action="append", metavar="A=V")
    s.add_argument("--schema")
    s.add_argument("--query", help="take label and predicates from this query text")
    s.add_argument("--query-id")
    s.set_defaults(func=cmd_score)

    v = sub.add_parser("validate", help="check frame files, schemas, configs or queries")
    v.add_argument("--frames")
    v.add_argument("--schema")
    v.add_argument("--config")
    v.add_argument("--query")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ValueError) as exc:
        _say(f"error: {exc}")
        return EXIT_INVALID
    except (MMCEPError, OSError, KeyError) as exc:
        _say(f"error: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
