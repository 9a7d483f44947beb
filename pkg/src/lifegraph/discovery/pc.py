"""PC algorithm (order-independent skeleton phase) with Meek orientation."""
from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np

from ..errors import DataError
from .ci import ci_test
from .graph import MixedGraph, PDAG, apply_meek_rules

IndepTest = Callable[[int, int, tuple], bool]


def _default_names(p: int) -> list[str]:
    return [f"X{i}" for i in range(p)]


def pc_skeleton(indep: IndepTest, p: int, max_cond: int | None = None):
    """Skeleton search; returns ``(adjacency sets, separating sets)`` over column indices.

    Adjacencies are frozen at the start of each conditioning level so the
    result does not depend on the order in which pairs are visited.
    """
    adj = {i: set(range(p)) - {i} for i in range(p)}
    sepset: dict[frozenset, tuple] = {}
    cap = p - 2 if max_cond is None else min(max_cond, p - 2)
    level = 0
    while level <= cap:
        frozen = {i: set(s) for i, s in adj.items()}
        tested = False
        for i, j in itertools.combinations(range(p), 2):
            if j not in adj[i]:
                continue
            for a, b in ((i, j), (j, i)):
                cand = sorted(frozen[a] - {b})
                if len(cand) < level:
                    continue
                tested = True
                for S in itertools.combinations(cand, level):
                    if indep(a, b, S):
                        adj[i].discard(j)
                        adj[j].discard(i)
                        sepset[frozenset((i, j))] = S
                        break
                if j not in adj[i]:
                    break
        if not tested:
            break
        level += 1
    return adj, sepset


def pc_discover(
    data=None,
    alpha: float = 0.05,
    names: Sequence[str] | None = None,
    indep: IndepTest | None = None,
    max_cond: int | None = None,
) -> MixedGraph:
    """Run PC and return the estimated CPDAG.

    ``indep(i, j, S)`` may replace the G-squared test on ``data``, e.g. with a
    d-separation oracle; it must return True for independence. Conflicting
    v-structure orientations are kept as bidirectional edges.
    """
    if indep is None:
        if data is None:
            raise DataError("pc_discover needs data or an independence oracle")
        data = np.asarray(data)
        p = data.shape[1]

        def indep(i, j, S):
            return ci_test(data, i, j, S, alpha).independent

    else:
        if names is None and data is None:
            raise DataError("names are required with a custom independence oracle")
        p = len(names) if names is not None else np.asarray(data).shape[1]
    names = list(names) if names is not None else _default_names(p)
    if len(names) != p:
        raise DataError(f"{len(names)} names for {p} variables")
    if p < 2:
        raise DataError("pc_discover needs at least 2 variables")

    adj, sepset = pc_skeleton(indep, p, max_cond)
    g = PDAG(names)
    for i in range(p):
        for j in adj[i]:
            if i < j:
                g.add_edge(names[i], names[j])
    for i, j in itertools.combinations(range(p), 2):
        if j in adj[i]:
            continue
        for k in sorted(adj[i] & adj[j]):
            if k not in sepset.get(frozenset((i, j)), ()):
                g.orient(names[i], names[k])
                g.orient(names[j], names[k])
    return apply_meek_rules(g).to_graph()
