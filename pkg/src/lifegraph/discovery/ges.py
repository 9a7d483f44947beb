"""Greedy equivalence search over CPDAGs with a discrete BIC score.

The forward phase applies the best-scoring valid Insert(X, Y, T) operator
until none improves the score; the backward phase then applies
Delete(X, Y, H) operators the same way. After every operator the state is
re-completed to a CPDAG through a consistent DAG extension.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DataError
from .graph import MixedGraph, PDAG, dag_to_cpdag, pdag_to_dag

_TIE_TOL = 1e-9


class DiscreteBIC:
    """Decomposable multinomial BIC; local scores are memoised per run."""

    def __init__(self, data, names: Sequence[str], penalty: float = 1.0):
        data = np.asarray(data)
        self.n = data.shape[0]
        self.names = list(names)
        self.penalty = penalty
        self.codes = {}
        self.card = {}
        for j, name in enumerate(self.names):
            levels, inv = np.unique(data[:, j], return_inverse=True)
            self.codes[name] = inv.ravel().astype(np.int64)
            self.card[name] = len(levels)
        self._cache: dict = {}

    def local(self, node: str, parents) -> float:
        key = (node, frozenset(parents))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        pa = sorted(parents)
        r = self.card[node]
        cfg = np.zeros(self.n, dtype=np.int64)
        q = 1
        for par in pa:
            cfg = cfg * self.card[par] + self.codes[par]
            q *= self.card[par]
        joint = cfg * r + self.codes[node]
        if q * r <= 10_000_000:
            counts = np.bincount(joint, minlength=q * r).reshape(q, r)
        else:
            _, inv = np.unique(cfg, return_inverse=True)
            counts = np.bincount(inv.ravel() * r + self.codes[node]).reshape(-1, r)
        nj = counts.sum(axis=1, keepdims=True)
        pos = counts > 0
        ll = float(np.sum(counts[pos] * np.log((counts / np.where(nj > 0, nj, 1))[pos])))
        score = ll - self.penalty * 0.5 * math.log(self.n) * (r - 1) * q
        self._cache[key] = score
        return score

    def dag_score(self, nodes, edges) -> float:
        parents = {n: set() for n in nodes}
        for a, b in edges:
            parents[b].add(a)
        return sum(self.local(n, parents[n]) for n in nodes)


@dataclass
class GESTrace:
    steps: list = field(default_factory=list)  # (phase, operator description, total score)


def _is_clique(g: PDAG, nodes) -> bool:
    return all(b in g.adj[a] for a, b in itertools.combinations(nodes, 2))


def _semi_directed_blocked(g: PDAG, src, dst, blockers) -> bool:
    """True when every semi-directed path ``src ~> dst`` passes through ``blockers``."""
    stack, seen = [src], {src}
    while stack:
        n = stack.pop()
        for m in g.adj[n]:
            if m in seen or m in blockers:
                continue
            if g.is_directed(m, n):
                continue
            if m == dst:
                return False
            seen.add(m)
            stack.append(m)
    return True


def _complete(g: PDAG, nodes) -> PDAG | None:
    dag = pdag_to_dag(g)
    if dag is None:
        return None
    return PDAG.from_graph(dag_to_cpdag(nodes, dag))


def _subsets(items):
    items = sorted(items)
    for k in range(len(items) + 1):
        yield from itertools.combinations(items, k)


def _forward_step(g: PDAG, score: DiscreteBIC):
    best = None
    for x in sorted(g.nodes):
        for y in sorted(g.nodes):
            if x == y or y in g.adj[x]:
                continue
            nbrs = g.neighbors(y)
            na = nbrs & g.adj[x]
            pa = g.parents(y)
            t0 = nbrs - g.adj[x] - {x}
            for T in _subsets(t0):
                cond = na | set(T)
                if not _is_clique(g, cond):
                    continue
                if not _semi_directed_blocked(g, y, x, cond):
                    continue
                delta = score.local(y, pa | cond | {x}) - score.local(y, pa | cond)
                if best is None or delta > best[0] + _TIE_TOL:
                    best = (delta, x, y, T)
    return best


def _backward_step(g: PDAG, score: DiscreteBIC):
    best = None
    for x in sorted(g.nodes):
        for y in sorted(g.adj[x]):
            if not (g.is_directed(x, y) or g.is_undirected(x, y)):
                continue
            na = g.neighbors(y) & g.adj[x]
            pa = g.parents(y)
            for H in _subsets(na):
                rest = na - set(H)
                if not _is_clique(g, rest):
                    continue
                delta = score.local(y, (rest | pa) - {x}) - score.local(y, rest | pa | {x})
                if best is None or delta > best[0] + _TIE_TOL:
                    best = (delta, x, y, H)
    return best


def ges_search(data, names: Sequence[str] | None = None, penalty: float = 1.0):
    """Run GES; returns ``(cpdag, trace)`` where the trace lists the score after each operator."""
    data = np.asarray(data)
    if data.ndim != 2:
        raise DataError("ges needs a 2-D data matrix")
    n, p = data.shape
    names = list(names) if names is not None else [f"X{i}" for i in range(p)]
    if len(names) != p:
        raise DataError(f"{len(names)} names for {p} variables")
    if p < 2:
        raise DataError("ges needs at least 2 variables")
    if n < p + 2:
        raise DataError(f"ges needs at least {p + 2} rows, got {n}")
    for j, name in enumerate(names):
        if np.all(data[:, j] == data[0, j]):
            raise DataError(f"column {name!r} has zero variance")

    score = DiscreteBIC(data, names, penalty)
    g = PDAG(names)
    trace = GESTrace()
    current = score.dag_score(names, [])
    trace.steps.append(("start", None, current))

    for phase, step in (("forward", _forward_step), ("backward", _backward_step)):
        while True:
            best = step(g, score)
            if best is None or best[0] <= _TIE_TOL:
                break
            delta, x, y, S = best
            nxt = g.copy()
            if phase == "forward":
                nxt.add_edge(x, y)
                nxt.orient(x, y)
                for t in S:
                    nxt.orient(t, y)
            else:
                nxt.remove_edge(x, y)
                for h in S:
                    nxt.orient(y, h)
                    if nxt.is_undirected(x, h):
                        nxt.orient(x, h)
            done = _complete(nxt, names)
            if done is None:
                break
            g = done
            current = score.dag_score(names, pdag_to_dag(g))
            trace.steps.append((phase, (x, y, tuple(S)), current))
    return g.to_graph(), trace


def ges_discover(data, names: Sequence[str] | None = None, penalty: float = 1.0) -> MixedGraph:
    """Greedy equivalence search with a multinomial BIC score (``penalty`` scales the complexity term)."""
    return ges_search(data, names, penalty)[0]
