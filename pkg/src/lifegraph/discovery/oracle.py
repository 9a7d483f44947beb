"""d-separation oracle on a known DAG, usable as the independence test of PC."""
from __future__ import annotations

from typing import Iterable, Sequence

import networkx as nx


def dsep_oracle(names: Sequence[str], edges: Iterable[tuple[str, str]]):
    """Return ``indep(i, j, S)`` answering d-separation queries by column index."""
    dag = nx.DiGraph()
    dag.add_nodes_from(names)
    dag.add_edges_from(edges)
    names = list(names)

    def indep(i, j, S):
        return nx.is_d_separator(dag, {names[i]}, {names[j]}, {names[k] for k in S})

    return indep
