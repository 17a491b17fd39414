"""
Topology statistics of the bank graph by adoption group
"""

import logging
from dataclasses import dataclass
from typing import Dict

import networkx as nx
import numpy as np

from .graph import BankGraph, hubs, systemic_core

LOGGER = logging.getLogger(__name__)


def _group_mean(values: np.ndarray, mask: np.ndarray) -> float:
    return float(values[mask].mean()) if mask.any() else float("nan")


@dataclass(frozen=True)
class ClusteringSummary:
    per_node: np.ndarray
    mean: float
    adopter_mean: float
    non_adopter_mean: float

    def to_dict(self) -> Dict:
        return {
            "per_node": self.per_node.tolist(),
            "mean": self.mean,
            "adopter_mean": self.adopter_mean,
            "non_adopter_mean": self.non_adopter_mean,
        }


@dataclass(frozen=True)
class PathLengthSummary:
    """Mean shortest-path length over connected unordered pairs"""

    mean: float
    adopter_mean: float
    non_adopter_mean: float
    connected_pairs: int
    disconnected_pairs: int

    def to_dict(self) -> Dict:
        return {
            "mean": self.mean,
            "adopter_mean": self.adopter_mean,
            "non_adopter_mean": self.non_adopter_mean,
            "connected_pairs": self.connected_pairs,
            "disconnected_pairs": self.disconnected_pairs,
        }


def clustering_coefficients(g: BankGraph) -> ClusteringSummary:
    """Local clustering (0 below degree 2) with adopter and non-adopter means"""
    if g.n == 0:
        empty = np.empty(0)
        return ClusteringSummary(empty, float("nan"), float("nan"), float("nan"))
    local = nx.clustering(g.graph)
    per_node = np.array([local[i] for i in range(g.n)], dtype=float)
    return ClusteringSummary(
        per_node=per_node,
        mean=float(per_node.mean()),
        adopter_mean=_group_mean(per_node, g.adoption),
        non_adopter_mean=_group_mean(per_node, ~g.adoption),
    )


def distance_matrix(g: BankGraph) -> np.ndarray:
    """Hop counts by breadth-first search; inf for disconnected pairs"""
    distances = np.full((g.n, g.n), np.inf)
    for source, targets in nx.all_pairs_shortest_path_length(g.graph):
        for target, hops in targets.items():
            distances[source, target] = hops
    return distances


def path_lengths(g: BankGraph) -> PathLengthSummary:
    """Average shortest paths overall, between adopters and between non-adopters.

    Group pairs are measured in the full graph. Disconnected pairs are
    excluded and counted.
    """
    distances = distance_matrix(g)
    upper = np.triu(np.ones((g.n, g.n), dtype=bool), 1)
    connected = upper & np.isfinite(distances)

    def pair_mean(mask):
        values = distances[mask]
        return float(values.mean()) if values.size else float("nan")

    adopters = np.outer(g.adoption, g.adoption)
    others = np.outer(~g.adoption, ~g.adoption)
    summary = PathLengthSummary(
        mean=pair_mean(connected),
        adopter_mean=pair_mean(connected & adopters),
        non_adopter_mean=pair_mean(connected & others),
        connected_pairs=int(connected.sum()),
        disconnected_pairs=int((upper & ~np.isfinite(distances)).sum()),
    )
    if summary.disconnected_pairs:
        LOGGER.info("%d node pairs are disconnected and left out of path lengths", summary.disconnected_pairs)
    return summary


def graph_summary(g: BankGraph) -> Dict:
    """Everything the netrisk report holds"""
    return {
        "nodes": g.n,
        "edges": g.edge_count,
        "density": g.density,
        "threshold": g.threshold,
        "adopters": int(g.adoption.sum()),
        "clustering": clustering_coefficients(g).to_dict(),
        "path_lengths": path_lengths(g).to_dict(),
        "hubs": [g.label(i) for i in hubs(g)],
        "systemic_core": [g.label(i) for i in systemic_core(g)],
    }
