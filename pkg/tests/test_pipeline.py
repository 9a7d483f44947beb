import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from builders import make_record
from lifegraph import cli
from lifegraph.discovery import MixedGraph
from lifegraph.elaboration import write_tte
from lifegraph.errors import ConfigError, DataError
from lifegraph.pipeline import (
    PipelineConfig,
    emit_edge_map,
    fold_pair_graph,
    graph_pairs,
    read_report_rows,
    run_pipeline,
    stage,
)
from lifegraph.univariate import read_curve_csv

DATA = Path(__file__).parent / "data"
TINY_SPEC = str(DATA / "spec_tiny.json")

pytestmark = pytest.mark.filterwarnings("ignore::lifegraph.errors.DataWarning")


def _g(nodes, directed=(), undirected=()):
    return MixedGraph(nodes, set(directed), {frozenset(e) for e in undirected})


class TestFold:
    NODES = ["wedding", "moving", "married", "wedding_next", "moving_next"]

    def test_current_to_next_becomes_temporal(self):
        g = _g(self.NODES, [("moving_next", "wedding")])  # orientation of the learned edge is ignored
        out = fold_pair_graph(g)
        assert out.directed == {("wedding", "moving")} and not out.undirected
        assert "moving_next" not in out.nodes

    def test_same_layer_stays_undirected(self):
        out = fold_pair_graph(_g(self.NODES, [("wedding", "married")]))
        assert not out.directed and out.undirected == {frozenset(("wedding", "married"))}

    def test_temporal_overrides_same_layer(self):
        out = fold_pair_graph(_g(self.NODES, [("wedding", "moving")], [("wedding", "moving_next")]))
        assert out.directed == {("wedding", "moving")} and not out.undirected

    def test_next_layer_and_self_loops_dropped(self):
        out = fold_pair_graph(_g(self.NODES, [("wedding", "wedding_next")], [("wedding_next", "moving_next")]))
        assert not out.skeleton()

    def test_pairs_both_orientations(self):
        g = _g(["a", "b", "c"], [("a", "b")], [("b", "c")])
        assert graph_pairs(g) == [("a", "b"), ("b", "c"), ("c", "b")]


class TestEdgeMap:
    def _curves(self):
        s = np.linspace(1.0, 0.2, 21)
        h = np.linspace(0.1, 1.0, 21)
        return s, h

    def test_single_edge(self, tmp_path):
        g = _g(["a", "b"], [("a", "b")])
        rows = emit_edge_map(g, {("a", "b"): self._curves()}, tmp_path / "m.csv")
        assert len(rows) == 1 and len(rows[0]) == 2 + 42
        with open(tmp_path / "m.csv") as fh:
            header, line = list(csv.reader(fh))
        assert header[2] == "S_0" and header[-1] == "h_20"
        vals = np.array(line[2:], dtype=float)
        assert np.all(np.diff(vals[:21]) <= 0) and vals[21:].max() == 1.0

    def test_missing_edge_named(self):
        g = _g(["a", "b", "c"], [("a", "b"), ("b", "c")])
        with pytest.raises(DataError, match="b -> c"):
            emit_edge_map(g, {("a", "b"): self._curves()})

    def test_wrong_length(self):
        with pytest.raises(DataError):
            emit_edge_map(_g(["a", "b"], [("a", "b")]), {("a", "b"): (np.ones(20), np.ones(20))})


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="bogus"):
            PipelineConfig.from_dict({"synthetic": TINY_SPEC, "bogus": 1})

    @pytest.mark.parametrize(
        "patch",
        [{"alpha": 1.5}, {"algorithm": "fci"}, {"train_frac": 1.0}, {"extra_pairs": [["wedding", "wedding"]]}, {"input": "x.csv"}],
    )
    def test_invalid(self, patch):
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict({"synthetic": TINY_SPEC, **patch})

    def test_relative_paths(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"synthetic": "s.json"}))
        cfg = PipelineConfig.from_json(tmp_path / "c.json")
        assert cfg.synthetic == str(tmp_path / "s.json")

    def test_hash_ignores_output_dir(self):
        a = PipelineConfig(synthetic=TINY_SPEC, output_dir="x")
        b = PipelineConfig(synthetic=TINY_SPEC, output_dir="y")
        assert a.config_hash() == b.config_hash() != PipelineConfig(synthetic=TINY_SPEC, seed=1).config_hash()

    def test_stage_prefix(self):
        with pytest.raises(DataError, match="stage 'fit': boom"):
            with stage("fit"):
                raise DataError("boom")


def _tiny(tmp_path, name="out", **kw):
    cfg = PipelineConfig(synthetic=TINY_SPEC, n_persons=300, seed=3, output_dir=str(tmp_path / name), **kw)
    return cfg, run_pipeline(cfg)


class TestRun:
    def test_tiny_run_products(self, tmp_path):
        cfg, report = _tiny(tmp_path, algorithm="both")
        out = Path(cfg.output_dir)
        for name in ("report.csv", "report.json", "edge_map.csv", "graph_pc.json", "graph_ges.dot", "events_graph.json", "config.json"):
            assert (out / name).is_file(), name
        rows = read_report_rows(out / "report.csv")
        assert list(rows[0])[:7] == ["Cause", "Effect", "Sample size", "C-index train", "C-index test", "Status", "Reason"]
        assert any(r["Cause"] == "wedding" and r["Effect"] == "divorce" for r in rows)
        meta = json.loads((out / "report.json").read_text())["metadata"]
        assert meta["seed"] == 3 and meta["config_hash"] == cfg.config_hash()
        for r in report.rows:
            if r.status == "ok":
                assert 0.0 <= r.c_index_test <= 1.0

    def test_curve_files_invariants(self, tmp_path):
        cfg, report = _tiny(tmp_path)
        pairs = Path(cfg.output_dir) / "pairs"
        assert any(pairs.iterdir())
        for d in pairs.iterdir():
            km = read_curve_csv(d / "km.csv")["S"]
            na = read_curve_csv(d / "na.csv")
            assert len(km) == 21 and np.all(np.diff(km) <= 0) and np.all((km >= 0) & (km <= 1))
            assert np.all(np.diff(na["H"]) >= 0)
            assert na["normalized"].max() in (0.0, 1.0)
            if (d / "average.csv").exists():
                with open(d / "average.csv") as fh:
                    mean = np.array([float(r["mean"]) for r in csv.DictReader(fh)])
                assert np.all(np.diff(mean) <= 1e-15) and np.all((mean >= 0) & (mean <= 1))

    def test_deterministic(self, tmp_path):
        cfg1, _ = _tiny(tmp_path, "a")
        cfg2, _ = _tiny(tmp_path, "b")
        for name in ("report.csv", "edge_map.csv", "events_graph.json", "calendars.csv"):
            assert (Path(cfg1.output_dir) / name).read_bytes() == (Path(cfg2.output_dir) / name).read_bytes()

    def test_too_few_observations(self, tmp_path):
        cfg = PipelineConfig(synthetic=TINY_SPEC, n_persons=1, output_dir=str(tmp_path / "o"))
        with pytest.raises(DataError, match="stage 'elaborate'"):
            run_pipeline(cfg)


class TestCLI:
    def test_exit_codes(self, tmp_path):
        (tmp_path / "bad.json").write_text(json.dumps({"synthetic": TINY_SPEC, "alpha": 2}))
        assert cli.main(["run", "--config", str(tmp_path / "bad.json")]) == cli.EXIT_CONFIG
        assert cli.main(["elaborate", "--in", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "x.csv")]) == cli.EXIT_DATA

    def test_numerical_exit(self, tmp_path):
        # gender separates event times perfectly; without a penalty the fit diverges
        recs = [make_record(t, 1, pid=f"p{t}", gender=int(t < 10)) for t in range(20)] * 2
        write_tte(recs, tmp_path / "t.csv")
        code = cli.main(["fit", "--in", str(tmp_path / "t.csv"), "--out", str(tmp_path / "fit"), "--l2", "0"])
        assert code == cli.EXIT_NUMERIC
        summary = json.loads((tmp_path / "fit" / "summary.json").read_text())
        assert summary["status"] == "failed"

    def test_stage_commands(self, tmp_path):
        cals, pairs, tte = tmp_path / "cal.csv", tmp_path / "pairs.csv", tmp_path / "tte.csv"
        assert cli.main(["simulate", "--spec", TINY_SPEC, "--n", "400", "--seed", "1", "--out", str(cals)]) == 0
        assert cli.main(["elaborate", "--in", str(cals), "--out", str(pairs)]) == 0
        assert cli.main(["elaborate", "--in", str(cals), "--out", str(tte), "--pair", "wedding", "child_birth"]) == 0
        assert cli.main(["discover", "--in", str(pairs), "--out", str(tmp_path / "g"), "--algorithm", "pc"]) == 0
        assert cli.main(["fit", "--in", str(tte), "--out", str(tmp_path / "fit")]) == 0
        graph = tmp_path / "g" / "events_graph.json"
        assert cli.main(["report", "--in", str(cals), "--graph", str(graph), "--out", str(tmp_path / "rep")]) == 0
        assert (tmp_path / "rep" / "report.csv").is_file()

    def test_run_subprocess(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"synthetic": TINY_SPEC, "n_persons": 200, "seed": 2}))
        res = subprocess.run(
            [sys.executable, "-m", "lifegraph.cli", "run", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")],
            capture_output=True,
            text=True,
        )
        assert res.returncode == 0, res.stderr
        assert "wedding" in res.stdout and (tmp_path / "o" / "report.csv").is_file()
