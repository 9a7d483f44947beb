import itertools

import numpy as np
import pytest

from lifegraph.discovery import (
    MixedGraph,
    ci_test,
    dag_to_cpdag,
    g2_statistic,
    ges_discover,
    ges_search,
    pc_discover,
    reduce_to_events,
    same_mec,
)
from lifegraph.discovery.graph import PDAG, pdag_to_dag
from lifegraph.errors import DataError
from oracles import cpdag_by_enumeration, dsep_indep, random_dag, sample_discrete_dag

XYZ = ["X", "Y", "Z"]


def _chain(rng, n):
    x = rng.integers(0, 2, n)
    y = np.where(rng.random(n) < 0.85, x, 1 - x)
    z = np.where(rng.random(n) < 0.85, y, 1 - y)
    return np.column_stack([x, y, z])


def _collider(rng, n):
    x = rng.integers(0, 2, n)
    y = rng.integers(0, 2, n)
    z = np.where(rng.random(n) < 0.9, x | y, 1 - (x | y))
    return np.column_stack([x, y, z])


class TestCI:
    def test_null_calibration(self):
        rng = np.random.default_rng(0)
        accepted = sum(ci_test(rng.integers(0, 2, (10_000, 2)), 0, 1).independent for _ in range(200))
        assert accepted >= 0.95 * 200 - 6  # binomial slack around the nominal level

    def test_copy(self, rng):
        x = rng.integers(0, 3, 1000)
        res = ci_test(np.column_stack([x, x]), 0, 1)
        assert not res.independent and res.p_value < 1e-6

    def test_chain(self, rng):
        d = _chain(rng, 10_000)
        assert ci_test(d, 0, 2, [1]).independent
        assert not ci_test(d, 0, 2).independent

    def test_hand_g2(self):
        # 2x2 table [[30, 10], [10, 30]]: G2 = 2 * sum O ln(O/E) with E = 20
        data = np.array([[0, 0]] * 30 + [[0, 1]] * 10 + [[1, 0]] * 10 + [[1, 1]] * 30)
        g2, dof = g2_statistic(data, 0, 1)
        assert g2 == pytest.approx(2 * (60 * np.log(1.5) + 20 * np.log(0.5)))
        assert dof == 1

    def test_dof_counts_observed_levels(self):
        # z=0 stratum sees only x=0, so it contributes no degrees of freedom
        data = np.array([[0, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1], [1, 0, 1], [0, 1, 1]])
        _, dof = g2_statistic(data, 0, 1, [2])
        assert dof == 1
        assert ci_test(data[:2], 0, 1, [2]).p_value == 1.0

    def test_bad_args(self, rng):
        d = rng.integers(0, 2, (10, 3))
        with pytest.raises(DataError):
            ci_test(d, 0, 0)
        with pytest.raises(DataError):
            ci_test(d, 0, 1, [1])


class TestGraph:
    def test_same_mec_examples(self):
        chain = MixedGraph(XYZ, {("X", "Y"), ("Y", "Z")})
        rev = MixedGraph(XYZ, {("Z", "Y"), ("Y", "X")})
        coll = MixedGraph(XYZ, {("X", "Z"), ("Y", "Z")})
        other = MixedGraph(XYZ, {("X", "Z"), ("Z", "Y")})
        assert same_mec(chain, chain) and same_mec(chain, rev)
        assert not same_mec(coll, other)
        with pytest.raises(DataError):
            same_mec(chain, MixedGraph(["X", "Y"]))

    def test_mixed_graph_validation(self):
        with pytest.raises(DataError):
            MixedGraph(["A"], {("A", "A")})
        with pytest.raises(DataError):
            MixedGraph(["A", "B"], {("A", "B")}, {frozenset(("A", "B"))})
        with pytest.raises(DataError):
            MixedGraph(["A"], {("A", "B")})

    def test_json_and_dot(self):
        g = MixedGraph(XYZ, {("X", "Y")}, {frozenset(("Y", "Z"))})
        assert MixedGraph.from_json(g.to_json()) == g
        dot = g.to_dot()
        assert '"X" -> "Y";' in dot and '"Y" -> "Z" [dir=none];' in dot

    def test_reduce_through_state(self):
        g = MixedGraph(["wedding", "married", "child_birth"], {("wedding", "married"), ("married", "child_birth")})
        out = reduce_to_events(g, ["wedding", "child_birth"])
        assert out.directed == {("wedding", "child_birth")} and not out.undirected

    def test_reduce_identity_and_induced(self):
        g = MixedGraph(["a", "b", "c"], {("a", "b")}, {frozenset(("b", "c"))})
        assert reduce_to_events(g, ["a", "b", "c"]) == g
        g2 = MixedGraph(["a", "b", "s"], {("a", "b"), ("s", "a")})
        assert reduce_to_events(g2, ["a", "b"]) == MixedGraph(["a", "b"], {("a", "b")})
        with pytest.raises(DataError):
            reduce_to_events(g, ["zzz"])

    def test_cpdag_matches_enumeration(self, rng):
        nodes = list("ABCDE")
        for _ in range(40):
            edges = random_dag(rng, nodes, 0.5)
            g = dag_to_cpdag(nodes, edges)
            directed, undirected = cpdag_by_enumeration(nodes, edges)
            assert g.directed == directed and g.undirected == undirected

    def test_dag_extension_is_consistent(self, rng):
        nodes = list("ABCDE")
        for _ in range(30):
            edges = random_dag(rng, nodes, 0.5)
            cp = dag_to_cpdag(nodes, edges)
            ext = pdag_to_dag(PDAG.from_graph(cp))
            assert ext is not None
            assert dag_to_cpdag(nodes, ext) == cp


class TestPC:
    @pytest.mark.parametrize(
        "edges",
        [[("X", "Y"), ("Y", "Z")], [("Y", "X"), ("Y", "Z")], [("X", "Z"), ("Y", "Z")]],
        ids=["chain", "fork", "collider"],
    )
    def test_three_node_oracle(self, edges):
        g = pc_discover(names=XYZ, indep=dsep_indep(XYZ, edges))
        directed, undirected = cpdag_by_enumeration(XYZ, edges)
        assert g.directed == directed and g.undirected == undirected

    def test_random_five_node_oracle(self, rng):
        nodes = list("ABCDE")
        for _ in range(20):
            edges = random_dag(rng, nodes, 0.4)
            g = pc_discover(names=nodes, indep=dsep_indep(nodes, edges))
            directed, undirected = cpdag_by_enumeration(nodes, edges)
            assert (g.directed, g.undirected) == (directed, undirected)

    def test_collider_from_data(self, rng):
        g = pc_discover(_collider(rng, 10_000), 0.05, XYZ)
        assert g.directed == {("X", "Z"), ("Y", "Z")} and not g.undirected

    def test_chain_from_data(self, rng):
        g = pc_discover(_chain(rng, 10_000), 0.05, XYZ)
        assert not g.directed
        assert g.undirected == {frozenset("XY"), frozenset("YZ")}

    def test_independent(self, rng):
        g = pc_discover(rng.integers(0, 2, (5000, 4)), 0.01)
        assert not g.skeleton()

    def test_order_independent_skeleton(self, rng):
        d = sample_discrete_dag(rng, list("ABCD"), [("A", "B"), ("B", "C"), ("A", "D"), ("C", "D")], 5000)
        g = pc_discover(d, 0.05, list("ABCD"))
        perm = [3, 1, 0, 2]
        gp = pc_discover(d[:, perm], 0.05, [list("ABCD")[k] for k in perm])
        assert g.skeleton() == gp.skeleton()


class TestGES:
    def test_chain_agrees_with_pc(self, rng):
        d = _chain(rng, 10_000)
        assert same_mec(ges_discover(d, XYZ), pc_discover(d, 0.05, XYZ))

    def test_collider(self, rng):
        g = ges_discover(_collider(rng, 10_000), XYZ)
        assert g.directed == {("X", "Z"), ("Y", "Z")}

    def test_independent(self, rng):
        assert not ges_discover(rng.integers(0, 2, (2000, 4))).skeleton()

    def test_copy_pair(self, rng):
        x = rng.integers(0, 2, 500)
        g = ges_discover(np.column_stack([x, x]), ["A", "B"])
        assert not g.directed and g.undirected == {frozenset("AB")}

    def test_trace_monotone(self, rng):
        d = sample_discrete_dag(rng, list("ABCD"), [("A", "C"), ("B", "C"), ("C", "D")], 5000)
        _, trace = ges_search(d, list("ABCD"))
        scores = [s for _, _, s in trace.steps]
        assert all(b > a for a, b in itertools.pairwise(scores))

    def test_rejects(self, rng):
        with pytest.raises(DataError):
            ges_discover(rng.integers(0, 2, (3, 3)))
        with pytest.raises(DataError):
            ges_discover(np.zeros((50, 2), dtype=int))
