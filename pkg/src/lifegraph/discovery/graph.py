"""Mixed (partially directed) graphs and the graph operations used by PC and GES."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Mapping

from ..errors import DataError


@dataclass(frozen=True)
class MixedGraph:
    """Nodes with directed and undirected edges.

    A directed pair may appear in both orientations, which encodes a
    bidirectional edge. An undirected pair never appears among the directed
    edges.
    """

    nodes: tuple[str, ...]
    directed: frozenset = frozenset()
    undirected: frozenset = frozenset()

    def __post_init__(self):
        nodes = tuple(self.nodes)
        directed = frozenset(tuple(e) for e in self.directed)
        undirected = frozenset(frozenset(e) for e in self.undirected)
        known = set(nodes)
        for a, b in directed:
            if a == b:
                raise DataError(f"self-loop on {a!r}")
            if a not in known or b not in known:
                raise DataError(f"edge {a}->{b} references an unknown node")
        for e in undirected:
            if len(e) != 2:
                raise DataError(f"malformed undirected edge {sorted(e)!r}")
            a, b = sorted(e)
            if a not in known or b not in known:
                raise DataError(f"edge {a}-{b} references an unknown node")
            if (a, b) in directed or (b, a) in directed:
                raise DataError(f"pair {a},{b} is both directed and undirected")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)

    # -- queries ---------------------------------------------------------

    def skeleton(self) -> frozenset:
        return frozenset(frozenset(e) for e in self.directed) | self.undirected

    def adjacent(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self.skeleton()

    def v_structures(self) -> frozenset:
        """Triples ``(a, c, b)`` with ``a -> c <- b``, ``a < b`` and ``a``, ``b`` non-adjacent."""
        skel = self.skeleton()
        parents: dict[str, set] = {}
        for a, c in self.directed:
            parents.setdefault(c, set()).add(a)
        out = set()
        for c, pa in parents.items():
            for a, b in itertools.combinations(sorted(pa), 2):
                if frozenset((a, b)) not in skel:
                    out.add((a, c, b))
        return frozenset(out)

    def sorted_directed(self) -> list[tuple[str, str]]:
        return sorted(self.directed)

    def sorted_undirected(self) -> list[tuple[str, str]]:
        return sorted(tuple(sorted(e)) for e in self.undirected)

    # -- serialisation ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "directed": [list(e) for e in self.sorted_directed()],
            "undirected": [list(e) for e in self.sorted_undirected()],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> MixedGraph:
        try:
            return cls(tuple(d["nodes"]), d.get("directed", ()), d.get("undirected", ()))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed graph document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> MixedGraph:
        return cls.from_dict(json.loads(text))

    def to_dot(self, name: str = "G") -> str:
        lines = [f"digraph {name} {{"]
        for n in self.nodes:
            lines.append(f'  "{n}";')
        for a, b in self.sorted_directed():
            lines.append(f'  "{a}" -> "{b}";')
        for a, b in self.sorted_undirected():
            lines.append(f'  "{a}" -> "{b}" [dir=none];')
        lines.append("}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# mutable PDAG used inside the search algorithms


class PDAG:
    """Skeleton plus a set of oriented marks; ``(a, b)`` in ``arrows`` means a tail at a, head at b."""

    def __init__(self, nodes: Iterable[str]):
        self.nodes = list(nodes)
        self.adj: dict[str, set] = {n: set() for n in self.nodes}
        self.arrows: set = set()

    @classmethod
    def from_graph(cls, g: MixedGraph) -> PDAG:
        p = cls(g.nodes)
        for a, b in g.directed:
            p.add_edge(a, b)
            p.arrows.add((a, b))
        for e in g.undirected:
            p.add_edge(*sorted(e))
        return p

    def copy(self) -> PDAG:
        p = PDAG(self.nodes)
        p.adj = {n: set(s) for n, s in self.adj.items()}
        p.arrows = set(self.arrows)
        return p

    def add_edge(self, a, b):
        self.adj[a].add(b)
        self.adj[b].add(a)

    def remove_edge(self, a, b):
        self.adj[a].discard(b)
        self.adj[b].discard(a)
        self.arrows.discard((a, b))
        self.arrows.discard((b, a))

    def is_directed(self, a, b) -> bool:
        """Strictly ``a -> b`` (not bidirected)."""
        return (a, b) in self.arrows and (b, a) not in self.arrows

    def is_undirected(self, a, b) -> bool:
        return b in self.adj[a] and (a, b) not in self.arrows and (b, a) not in self.arrows

    def orient(self, a, b):
        self.arrows.add((a, b))

    def parents(self, n) -> set:
        return {a for a in self.adj[n] if self.is_directed(a, n)}

    def children(self, n) -> set:
        return {b for b in self.adj[n] if self.is_directed(n, b)}

    def neighbors(self, n) -> set:
        """Undirected neighbours."""
        return {b for b in self.adj[n] if self.is_undirected(n, b)}

    def to_graph(self) -> MixedGraph:
        directed, undirected = set(), set()
        for a in self.nodes:
            for b in self.adj[a]:
                if (a, b) in self.arrows:
                    directed.add((a, b))
                elif (b, a) not in self.arrows:
                    undirected.add(frozenset((a, b)))
        return MixedGraph(tuple(self.nodes), directed, undirected)


def apply_meek_rules(g: PDAG) -> PDAG:
    """Orient undirected edges by Meek's rules R1-R4 until nothing changes (in place)."""
    changed = True
    while changed:
        changed = False
        for a in sorted(g.nodes):
            for b in sorted(g.neighbors(a)):
                if not g.is_undirected(a, b):
                    continue
                if _meek_orients(g, a, b):
                    g.orient(a, b)
                    changed = True
    return g


def _meek_orients(g: PDAG, a, b) -> bool:
    # R1: c -> a - b, c and b non-adjacent
    for c in g.parents(a):
        if b not in g.adj[c]:
            return True
    # R2: a -> c -> b with a - b
    for c in g.children(a):
        if g.is_directed(c, b):
            return True
    # R3: a - c -> b, a - d -> b, c and d non-adjacent
    cands = [c for c in g.neighbors(a) if g.is_directed(c, b)]
    for c, d in itertools.combinations(cands, 2):
        if d not in g.adj[c]:
            return True
    # R4: a - c -> d -> b, c and b non-adjacent, a and d adjacent
    for c in g.neighbors(a):
        if b in g.adj[c]:
            continue
        for d in g.children(c):
            if d in g.adj[a] and g.is_directed(d, b):
                return True
    return False


def dag_to_cpdag(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> MixedGraph:
    """CPDAG of the Markov equivalence class of a DAG."""
    nodes = list(nodes)
    edges = list(edges)
    g = PDAG(nodes)
    for a, b in edges:
        g.add_edge(a, b)
    parents: dict[str, list] = {n: [] for n in nodes}
    for a, b in edges:
        parents[b].append(a)
    for c, pa in parents.items():
        for a, b in itertools.combinations(pa, 2):
            if b not in g.adj[a]:
                g.orient(a, c)
                g.orient(b, c)
    return apply_meek_rules(g).to_graph()


def pdag_to_dag(g: PDAG) -> list[tuple[str, str]] | None:
    """A consistent DAG extension of a PDAG (Dor and Tarsi), or ``None`` if none exists."""
    work = g.copy()
    edges = [(a, b) for (a, b) in g.arrows if (b, a) not in g.arrows]
    remaining = set(work.nodes)
    while remaining:
        found = None
        for x in sorted(remaining):
            if work.children(x):
                continue
            nbrs = work.neighbors(x)
            adjacent = work.adj[x]
            if all(adjacent - {y} <= work.adj[y] for y in nbrs):
                found = x
                break
        if found is None:
            return None
        for y in sorted(work.neighbors(found)):
            edges.append((y, found))
        for y in list(work.adj[found]):
            work.remove_edge(found, y)
        remaining.discard(found)
    return sorted(set(edges))


def same_mec(a: MixedGraph, b: MixedGraph) -> bool:
    """Whether two graphs share skeleton and v-structures."""
    if set(a.nodes) != set(b.nodes):
        raise DataError("graphs have different node sets")
    return a.skeleton() == b.skeleton() and a.v_structures() == b.v_structures()


def _reachable(g: MixedGraph, src: str, events: set, strict: bool) -> set:
    """Events reachable from ``src`` along paths whose interior nodes are non-events."""
    succ: dict[str, set] = {n: set() for n in g.nodes}
    for a, b in g.directed:
        succ[a].add(b)
    if not strict:
        for e in g.undirected:
            a, b = tuple(e)
            succ[a].add(b)
            succ[b].add(a)
    found, stack, seen = set(), [src], {src}
    while stack:
        n = stack.pop()
        for m in succ[n]:
            if m in events:
                if m != src:
                    found.add(m)
            elif m not in seen:
                seen.add(m)
                stack.append(m)
    return found


def reduce_to_events(g: MixedGraph, event_nodes: Iterable[str]) -> MixedGraph:
    """Contract paths through non-event (state) nodes into event-to-event edges.

    ``A -> B`` is kept when ``g`` has a path from ``A`` to ``B`` whose
    interior nodes are all non-events. Undirected edges may be walked either
    way; a pair connected in both directions only through such edges is
    emitted undirected, otherwise each direction supported by a purely
    directed path is emitted as a directed edge.
    """
    events = [n for n in g.nodes if n in set(event_nodes)]
    missing = set(event_nodes) - set(g.nodes)
    if missing:
        raise DataError(f"event nodes not in graph: {sorted(missing)}")
    ev = set(events)
    loose = {a: _reachable(g, a, ev, strict=False) for a in events}
    strict = {a: _reachable(g, a, ev, strict=True) for a in events}
    directed, undirected = set(), set()
    for a, b in itertools.combinations(events, 2):
        fwd, bwd = b in loose[a], a in loose[b]
        sfwd, sbwd = b in strict[a], a in strict[b]
        if sfwd:
            directed.add((a, b))
        if sbwd:
            directed.add((b, a))
        if sfwd or sbwd:
            continue
        if fwd and bwd:
            undirected.add(frozenset((a, b)))
        elif fwd:
            directed.add((a, b))
        elif bwd:
            directed.add((b, a))
    return MixedGraph(tuple(events), directed, undirected)
