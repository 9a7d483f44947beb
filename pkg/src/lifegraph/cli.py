"""Command-line entry point (``lifegraph``).

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .calendar import GroundTruthSpec, generate_synthetic, read_calendars, write_calendars
from .discovery import MixedGraph
from .elaboration import extract_pair_observations, extract_tte, pair_matrix, read_pair_observations, read_tte, write_pair_observations, write_tte
from .errors import ConfigError, DataError, NumericalError
from . import pipeline as pl

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _cmd_simulate(args) -> None:
    spec = GroundTruthSpec.from_json(args.spec)
    if args.seed is not None:
        spec = GroundTruthSpec(spec.events, spec.edges, spec.covariates, spec.roots, args.seed)
    write_calendars(generate_synthetic(spec, args.n), args.out)


def _cmd_elaborate(args) -> None:
    cals = read_calendars(args.inp)
    if args.pair:
        write_tte(extract_tte(cals, *args.pair), args.out)
    else:
        write_pair_observations(extract_pair_observations(cals), args.out)


def _cmd_discover(args) -> None:
    data, names = pair_matrix(read_pair_observations(args.inp))
    cfg = pl.PipelineConfig(input="-", alpha=args.alpha, algorithm=args.algorithm, ges_penalty=args.penalty)
    cfg.validate()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    graphs = pl.discover(data, names, cfg)
    for algo, g in graphs.items():
        pl._write_graph(g, out, f"graph_{algo}")
    folded = pl.fold_pair_graph(graphs["ges" if "ges" in graphs else "pc"])
    events = pl.reduce_to_events(folded, [e for e in pl.PAIR_EVENTS if e in folded.nodes])
    pl._write_graph(events, out, "events_graph")


def _cmd_fit(args) -> None:
    records = read_tte(args.inp)
    if not records:
        raise DataError(f"{args.inp}: no records")
    cfg = pl.PipelineConfig(input="-", train_frac=args.train_frac, l2_scale=args.l2, seed=args.seed)
    cfg.validate()
    cause, effect = records[0].cause, records[0].effect
    row, _, _ = pl.fit_pair(records, cause, effect, cfg, (args.seed, 0), Path(args.out))
    (Path(args.out) / "summary.json").write_text(json.dumps(pl.asdict(row), indent=2, sort_keys=True) + "\n")
    if row.status != "ok":
        raise NumericalError(f"{cause} -> {effect}: {row.reason}")


def _cmd_report(args) -> None:
    cals = read_calendars(args.inp)
    graph = MixedGraph.from_json(Path(args.graph).read_text())
    cfg = pl.PipelineConfig.from_json(args.config) if args.config else pl.PipelineConfig(input=args.inp)
    if args.seed is not None:
        cfg.seed = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pairs = [(a, b, "graph") for a, b in pl.graph_pairs(graph)]
    for a, b in cfg.extra_pairs:
        if (a, b) not in {(p[0], p[1]) for p in pairs}:
            pairs.append((a, b, "extra"))
    rows, curves = [], {}
    for i, (a, b, src) in enumerate(pairs):
        row, c, _ = pl.fit_pair(extract_tte(cals, a, b), a, b, cfg, (int(cfg.seed), i), out / "pairs" / f"{a}__{b}")
        row.source = src
        rows.append(row)
        if c is not None:
            curves[(a, b)] = c
    pl.emit_edge_map(graph, curves, out / "edge_map.csv")
    report = pl.FitReport(rows, str(args.graph), {"seed": int(cfg.seed), "config_hash": cfg.config_hash()})
    report.write_csv(out / "report.csv")
    report.write_json(out / "report.json")


def _cmd_run(args) -> None:
    cfg = pl.PipelineConfig.from_json(args.config)
    if args.out is not None:
        cfg.output_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    report = pl.run_pipeline(cfg)
    for r in report.rows:
        print(f"{r.cause:>12} -> {r.effect:<12} n={r.sample_size:<6} train={pl._fmt(r.c_index_train) or '-':<9} "
              f"test={pl._fmt(r.c_index_test) or '-':<9} {r.status}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lifegraph", description="Life-event graph discovery and per-edge survival models.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate synthetic calendars from a ground-truth spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("elaborate", help="calendars -> event-pair observations or time-to-event records")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--pair", nargs=2, metavar=("CAUSE", "EFFECT"))
    s.set_defaults(func=_cmd_elaborate)

    s = sub.add_parser("discover", help="learn graphs from event-pair observations")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--algorithm", choices=("pc", "ges", "both"), default="ges")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--penalty", type=float, default=1.0)
    s.set_defaults(func=_cmd_discover)

    s = sub.add_parser("fit", help="fit a Cox model to one time-to-event file")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--l2", type=float, default=0.1)
    s.add_argument("--train-frac", type=float, default=0.6)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_fit)

    s = sub.add_parser("report", help="fit every edge of an events graph and write the report")
    s.add_argument("--in", dest="inp", required=True, help="calendar CSV")
    s.add_argument("--graph", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=_cmd_report)

    s = sub.add_parser("run", help="run the full pipeline")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=_cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    # data warnings (dropped constant columns and the like) only show with -v
    logging.captureWarnings(True)
    logging.getLogger("py.warnings").setLevel(logging.WARNING if args.verbose else logging.ERROR)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
