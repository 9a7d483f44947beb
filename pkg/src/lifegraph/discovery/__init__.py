"""Causal discovery over discrete event/state variables."""
from .ci import CITestResult, ci_test, g2_statistic
from .ges import DiscreteBIC, ges_discover, ges_search
from .graph import MixedGraph, dag_to_cpdag, reduce_to_events, same_mec
from .oracle import dsep_oracle
from .pc import pc_discover, pc_skeleton

__all__ = [
    "CITestResult",
    "DiscreteBIC",
    "MixedGraph",
    "ci_test",
    "dag_to_cpdag",
    "dsep_oracle",
    "g2_statistic",
    "ges_discover",
    "ges_search",
    "pc_discover",
    "pc_skeleton",
    "reduce_to_events",
    "same_mec",
]
