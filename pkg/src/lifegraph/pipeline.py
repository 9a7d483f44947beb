"""End-to-end run: calendars -> event pairs -> discovery -> per-edge survival models.

Everything written to the output directory is a deterministic function of
the configuration (including its seed); no timestamps or host details are
recorded.
"""
from __future__ import annotations

import contextlib
import csv
import hashlib
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import calendar as cal_mod
from .calendar import EVENTS, GroundTruthSpec, generate_synthetic, read_calendars, write_calendars
from .cox import average_survival, c_index, conditioned_curves, fit_cox
from .discovery import MixedGraph, ges_discover, pc_discover, reduce_to_events
from .elaboration import (
    PAIR_EVENTS,
    extract_pair_observations,
    extract_tte,
    pair_matrix,
    stratified_split,
    write_pair_observations,
    write_tte,
)
from .errors import ConfigError, DataError, DataWarning, LifegraphError, NumericalError
from .univariate import HORIZON, ecdf_survival, km_fit, na_fit, normalized_hazard, write_cumhazard_csv, write_survival_csv

log = logging.getLogger(__name__)

CONDITIONING_COVARIATES = ("age_group", "nationality", "children", "cars", "owns_home")
REPORT_COLUMNS = ("Cause", "Effect", "Sample size", "C-index train", "C-index test", "Status", "Reason")


@dataclass
class PipelineConfig:
    input: str | None = None
    synthetic: dict | str | None = None
    n_persons: int = 1000
    alpha: float = 0.05
    algorithm: str = "ges"
    train_frac: float = 0.6
    l2_scale: float = 0.1
    seed: int = 0
    output_dir: str = "lifegraph-out"
    extra_pairs: list = field(default_factory=lambda: [["wedding", "divorce"]])
    ges_penalty: float = 1.0
    conditioned_on: list = field(default_factory=lambda: list(CONDITIONING_COVARIATES))
    age_groups: list = field(default_factory=lambda: [list(g) for g in cal_mod.AGE_GROUPS])

    @classmethod
    def from_dict(cls, d: Mapping) -> PipelineConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> PipelineConfig:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = cls.from_dict(doc)
        # relative paths inside the config resolve against the config's directory
        base = Path(path).resolve().parent
        if cfg.input and not Path(cfg.input).is_absolute():
            cfg.input = str(base / cfg.input)
        if isinstance(cfg.synthetic, str) and not Path(cfg.synthetic).is_absolute():
            cfg.synthetic = str(base / cfg.synthetic)
        return cfg

    def validate(self) -> None:
        if (self.input is None) == (self.synthetic is None):
            raise ConfigError("exactly one of 'input' and 'synthetic' must be given")
        if self.algorithm not in ("pc", "ges", "both"):
            raise ConfigError(f"algorithm must be pc, ges or both, got {self.algorithm!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if not 0.0 < self.train_frac < 1.0:
            raise ConfigError("train_frac must lie in (0, 1)")
        if self.l2_scale < 0:
            raise ConfigError("l2_scale must be non-negative")
        if int(self.n_persons) < 1:
            raise ConfigError("n_persons must be >= 1")
        for pair in self.extra_pairs:
            if len(pair) != 2 or pair[0] not in EVENTS or pair[1] not in EVENTS or pair[0] == pair[1]:
                raise ConfigError(f"invalid extra pair {pair!r}")
        if len(self.age_groups) != len(cal_mod.AGE_GROUPS):
            raise ConfigError(f"age_groups must list {len(cal_mod.AGE_GROUPS)} [lo, hi] ranges")

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """Hash of every setting that influences results (the output directory is excluded)."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ReportRow:
    cause: str
    effect: str
    sample_size: int
    c_index_train: float | None
    c_index_test: float | None
    status: str = "ok"
    reason: str = ""
    source: str = "graph"


@dataclass
class FitReport:
    rows: list[ReportRow]
    graph: str
    metadata: dict

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "graph": self.graph, "metadata": self.metadata}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_COLUMNS)
            for r in self.rows:
                w.writerow(
                    (r.cause, r.effect, r.sample_size, _fmt(r.c_index_train), _fmt(r.c_index_test), r.status, r.reason)
                )

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fmt(v):
    return "" if v is None else f"{v:.6f}"


@contextlib.contextmanager
def stage(name: str):
    """Re-raise lifegraph errors with the stage name prepended, preserving the error category."""
    try:
        yield
    except LifegraphError as exc:
        for kind in (ConfigError, DataError, NumericalError):
            if isinstance(exc, kind):
                raise kind(f"stage {name!r}: {exc}") from exc
        raise


# ---------------------------------------------------------------------------
# graph folding


def fold_pair_graph(g: MixedGraph, events: Sequence[str] = PAIR_EVENTS) -> MixedGraph:
    """Map a graph over current/next pair columns onto current-time variables.

    Any edge between a current-year variable ``u`` and a next-event column
    ``v_next`` becomes ``u -> v`` (temporal order is known). Edges among
    current-year variables describe same-year association without an order
    and are kept undirected unless a temporal edge already links the pair.
    Edges among next-event columns are dropped, as are ``e -> e`` loops.
    """
    suffix = "_next"
    current = [n for n in g.nodes if not n.endswith(suffix)]
    temporal = set()
    for e in g.skeleton():
        a, b = sorted(e)
        a_next, b_next = a.endswith(suffix), b.endswith(suffix)
        if a_next == b_next:
            continue
        cur, nxt = (b, a[: -len(suffix)]) if a_next else (a, b[: -len(suffix)])
        if cur != nxt and nxt in current:
            temporal.add((cur, nxt))
    undirected = set()
    for e in g.skeleton():
        a, b = sorted(e)
        if a.endswith(suffix) or b.endswith(suffix):
            continue
        if (a, b) in temporal or (b, a) in temporal:
            continue
        undirected.add(e)
    return MixedGraph(tuple(current), temporal, undirected)


def graph_pairs(g: MixedGraph) -> list[tuple[str, str]]:
    """Ordered ``(cause, effect)`` pairs of a graph; undirected edges give both orientations."""
    pairs = set(g.directed)
    for e in g.undirected:
        a, b = sorted(e)
        pairs.add((a, b))
        pairs.add((b, a))
    return sorted(pairs)


# ---------------------------------------------------------------------------
# edge map


def emit_edge_map(graph: MixedGraph, per_edge_curves: Mapping, path=None) -> list[list]:
    """One row per graph edge with 21 survival and 21 normalised-hazard values.

    ``per_edge_curves[(cause, effect)]`` must hold ``(survival, normalized_hazard)``
    arrays of length 21.
    """
    header = ["cause", "effect"] + [f"S_{t}" for t in range(HORIZON)] + [f"h_{t}" for t in range(HORIZON)]
    rows = []
    for cause, effect in graph_pairs(graph):
        try:
            surv, haz = per_edge_curves[(cause, effect)]
        except KeyError:
            raise DataError(f"no curves for edge {cause} -> {effect}") from None
        if len(surv) != HORIZON or len(haz) != HORIZON:
            raise DataError(f"curves for edge {cause} -> {effect} must have {HORIZON} values")
        rows.append([cause, effect] + [float(v) for v in surv] + [float(v) for v in haz])
    if path is not None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow(r[:2] + [repr(v) for v in r[2:]])
    return rows


# ---------------------------------------------------------------------------
# run


def _write_graph(g: MixedGraph, out: Path, stem: str) -> None:
    (out / f"{stem}.json").write_text(g.to_json())
    (out / f"{stem}.dot").write_text(g.to_dot(stem))


def _write_average(curve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "mean", "sd"))
        for t, m, s in zip(curve.times, curve.mean, curve.sd):
            w.writerow((int(t), repr(float(m)), repr(float(s))))


def _write_conditioned(curves: Mapping, path) -> None:
    levels = list(curves)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"level={lvl:g}" if isinstance(lvl, float) else f"level={lvl}" for lvl in levels])
        for t in range(HORIZON):
            w.writerow([t] + [repr(float(curves[lvl].survival[t])) for lvl in levels])


def _write_histograms(cals, out: Path) -> None:
    out.mkdir(exist_ok=True)
    for e in EVENTS:
        ages = [c.years[i].age for c in cals for i in c.event_years(e)]
        if not ages:
            continue
        hist, surv = ecdf_survival(ages)
        with open(out / f"{e}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("age", "count", "S"))
            for age, count in zip(hist.values, hist.counts):
                w.writerow((int(age), int(count), repr(float(surv.at(age)))))


def load_calendars(cfg: PipelineConfig):
    if cfg.input is not None:
        if not Path(cfg.input).is_file():
            raise ConfigError(f"input calendar file not found: {cfg.input}")
        return read_calendars(cfg.input)
    spec = cfg.synthetic
    if isinstance(spec, str):
        if not Path(spec).is_file():
            raise ConfigError(f"synthetic spec file not found: {spec}")
        spec = GroundTruthSpec.from_json(spec)
    else:
        spec = GroundTruthSpec.from_dict(spec)
    spec = GroundTruthSpec(spec.events, spec.edges, spec.covariates, spec.roots, int(cfg.seed))
    return generate_synthetic(spec, int(cfg.n_persons))


def discover(data, names, cfg: PipelineConfig) -> dict[str, MixedGraph]:
    """Run the configured algorithms; constant columns are left out and kept as isolated nodes."""
    data = np.asarray(data)
    names = list(names)
    keep = [j for j in range(data.shape[1]) if np.any(data[:, j] != data[0, j])]
    dropped = [names[j] for j in range(len(names)) if j not in keep]
    if dropped:
        warnings.warn(f"constant columns left out of discovery: {dropped}", DataWarning, stacklevel=2)
    if len(keep) < 2:
        raise DataError(f"fewer than two non-constant pair columns (constant: {dropped})")
    sub, sub_names = data[:, keep], [names[j] for j in keep]
    found = {}
    if cfg.algorithm in ("pc", "both"):
        found["pc"] = pc_discover(sub, cfg.alpha, sub_names)
    if cfg.algorithm in ("ges", "both"):
        found["ges"] = ges_discover(sub, sub_names, cfg.ges_penalty)
    return {k: MixedGraph(tuple(names), g.directed, g.undirected) for k, g in found.items()}


def fit_pair(records, cause, effect, cfg: PipelineConfig, split_seed, pair_dir: Path | None = None):
    """Fit one pair; returns ``(report row, survival grid, normalised hazard grid)``."""
    n = len(records)
    if n == 0:
        return ReportRow(cause, effect, 0, None, None, "failed", "cause never occurs"), None, None
    durations = [r.duration for r in records]
    observed = [r.observed for r in records]
    km = km_fit(durations, observed)
    na = na_fit(durations, observed)
    curves = (km.on_grid(), normalized_hazard(na))
    if pair_dir is not None:
        pair_dir.mkdir(parents=True, exist_ok=True)
        write_tte(records, pair_dir / "tte.csv")
        write_survival_csv(km, pair_dir / "km.csv")
        write_cumhazard_csv(na, pair_dir / "na.csv")
    try:
        split = stratified_split(records, cfg.train_frac, split_seed)
        if not any(r.observed for r in split.train):
            raise DataError("no uncensored records in the training split")
        model = fit_cox(split.train, cfg.l2_scale)
        c_train = c_index(model.linear_predictor(split.train), [r.duration for r in split.train], [r.observed for r in split.train])
        c_test = c_index(model.linear_predictor(split.test), [r.duration for r in split.test], [r.observed for r in split.test])
    except (DataError, NumericalError) as exc:
        log.warning("pair %s -> %s failed: %s", cause, effect, exc)
        return ReportRow(cause, effect, n, None, None, "failed", str(exc)), curves, None
    if pair_dir is not None:
        model.save(pair_dir / "model.json")
        _write_average(average_survival(model, records), pair_dir / "average.csv")
        for cov in cfg.conditioned_on:
            try:
                cc = conditioned_curves(model, records, cov)
            except DataError as exc:
                log.warning("no conditioned curves on %s for %s -> %s: %s", cov, cause, effect, exc)
                continue
            _write_conditioned(cc, pair_dir / f"conditioned_{cov}.csv")
    return ReportRow(cause, effect, n, c_train, c_test), curves, model


def run_pipeline(cfg: PipelineConfig) -> FitReport:
    """Execute every stage and write all products under ``cfg.output_dir``."""
    cfg.validate()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    groups = tuple(tuple(g) for g in cfg.age_groups)

    with stage("load"):
        cals = load_calendars(cfg)
        if not cals:
            raise DataError("no calendars")
        if cfg.synthetic is not None:
            write_calendars(cals, out / "calendars.csv")
    with stage("elaborate"):
        obs = extract_pair_observations(cals)
        write_pair_observations(obs, out / "pair_observations.csv")
        data, names = pair_matrix(obs)
        if len(obs) < len(names) + 2:
            raise DataError(f"only {len(obs)} event-pair observations; need at least {len(names) + 2}")
    with stage("discover"):
        graphs = discover(data, names, cfg)
        for algo, g in graphs.items():
            _write_graph(g, out, f"graph_{algo}")
        chosen = "ges" if "ges" in graphs else "pc"
        folded = fold_pair_graph(graphs[chosen])
        present = [e for e in PAIR_EVENTS if e in folded.nodes]
        events_graph = reduce_to_events(folded, present)
        _write_graph(events_graph, out, "events_graph")

    pairs = [(a, b, "graph") for a, b in graph_pairs(events_graph)]
    seen = {(a, b) for a, b, _ in pairs}
    for a, b in cfg.extra_pairs:
        if (a, b) not in seen:
            pairs.append((a, b, "extra"))
            seen.add((a, b))

    rows, edge_curves = [], {}
    with stage("fit"):
        for i, (cause, effect, source) in enumerate(pairs):
            records = extract_tte(cals, cause, effect, groups)
            row, curves, _ = fit_pair(records, cause, effect, cfg, (int(cfg.seed), i), out / "pairs" / f"{cause}__{effect}")
            row.source = source
            rows.append(row)
            if curves is not None:
                edge_curves[(cause, effect)] = curves
    with stage("report"):
        emit_edge_map(events_graph, edge_curves, out / "edge_map.csv")
        _write_histograms(cals, out / "histograms")
        report = FitReport(
            rows,
            "events_graph.json",
            {
                "seed": int(cfg.seed),
                "config_hash": cfg.config_hash(),
                "algorithm": cfg.algorithm,
                "graph_source": chosen,
                "n_persons": len(cals),
                "n_pair_observations": len(obs),
            },
        )
        report.write_csv(out / "report.csv")
        report.write_json(out / "report.json")
        with open(out / "config.json", "w") as fh:
            d = cfg.to_dict()
            d.pop("output_dir")
            json.dump(d, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report


def read_report_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


__all__ = [
    "FitReport",
    "PipelineConfig",
    "ReportRow",
    "emit_edge_map",
    "fit_pair",
    "fold_pair_graph",
    "graph_pairs",
    "run_pipeline",
]
