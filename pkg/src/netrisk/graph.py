"""
Binary bank graph derived from a spatial weight matrix
"""

import logging
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd

from src.core.errors import EstimationWarning, NetRiskError
from src.spatial import WeightMatrix

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class BankGraph:
    """Undirected adjacency with adoption and size node attributes"""

    adjacency: np.ndarray
    threshold: float
    adoption: np.ndarray
    size: Optional[np.ndarray] = None
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        adjacency = np.array(self.adjacency, dtype=bool, copy=True)
        n = adjacency.shape[0]
        if adjacency.shape != (n, n):
            raise NetRiskError("adjacency must be square")
        if not np.array_equal(adjacency, adjacency.T):
            raise NetRiskError("adjacency must be symmetric")
        if adjacency.diagonal().any():
            raise NetRiskError("adjacency must have a zero diagonal")
        adoption = np.array(self.adoption, dtype=bool, copy=True)
        if adoption.shape != (n,):
            raise NetRiskError(f"adoption has {adoption.size} entries for {n} nodes")
        size = None
        if self.size is not None:
            size = np.array(self.size, dtype=float, copy=True)
            if size.shape != (n,):
                raise NetRiskError(f"size has {size.size} entries for {n} nodes")
            size.setflags(write=False)
        labels = tuple(str(l) for l in self.labels) if self.labels is not None else None
        if labels is not None and len(labels) != n:
            raise NetRiskError(f"{len(labels)} labels for {n} nodes")
        adjacency.setflags(write=False)
        adoption.setflags(write=False)
        object.__setattr__(self, "adjacency", adjacency)
        object.__setattr__(self, "adoption", adoption)
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def edge_count(self) -> int:
        return int(np.triu(self.adjacency, 1).sum())

    @property
    def density(self) -> float:
        pairs = self.n * (self.n - 1) / 2
        return self.edge_count / pairs if pairs else 0.0

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def label(self, i: int) -> str:
        return self.labels[i] if self.labels is not None else str(i)

    @cached_property
    def graph(self) -> nx.Graph:
        """networkx view; nodes are integer positions with adopter and size attributes"""
        g = nx.Graph()
        for i in range(self.n):
            g.add_node(i, adopter=bool(self.adoption[i]),
                       size=None if self.size is None else float(self.size[i]), label=self.label(i))
        rows, cols = np.nonzero(np.triu(self.adjacency, 1))
        g.add_edges_from(zip(rows.tolist(), cols.tolist()))
        return g


def default_threshold(weights: WeightMatrix) -> float:
    """Median of the positive entries of W"""
    positive = weights.matrix[weights.matrix > 0]
    if positive.size == 0:
        raise NetRiskError("Weight matrix has no positive entries")
    return float(np.median(positive))


def binarize(weights: WeightMatrix, threshold: Optional[float] = None, adoption: Optional[Sequence] = None,
             size: Optional[Sequence[float]] = None) -> BankGraph:
    """Edge i-j iff max(w_ij, w_ji) >= threshold; threshold defaults to the median positive entry"""
    if threshold is None:
        threshold = default_threshold(weights)
    if not threshold > 0:
        raise NetRiskError(f"threshold must be positive, got {threshold}")
    symmetric = np.maximum(weights.matrix, weights.matrix.T)
    adjacency = symmetric >= threshold
    np.fill_diagonal(adjacency, False)
    if adoption is None:
        adoption = np.zeros(weights.n, dtype=bool)
    g = BankGraph(adjacency, float(threshold), np.asarray(adoption), None if size is None else np.asarray(size),
                  weights.labels)
    if g.edge_count == 0:
        warnings.warn(f"Threshold {threshold:.4g} leaves the graph without edges", EstimationWarning, stacklevel=2)
    LOGGER.info("Bank graph: %d nodes, %d edges, density %.3f at threshold %.4g", g.n, g.edge_count,
                g.density, threshold)
    return g


def hubs(g: BankGraph) -> List[int]:
    """Top decile of nodes by degree (at least one), ties broken by position"""
    if g.n == 0:
        return []
    count = max(1, math.ceil(g.n / 10))
    order = np.argsort(-g.degrees, kind="stable")
    return sorted(int(i) for i in order[:count])


def systemic_core(g: BankGraph) -> List[int]:
    """Adopters together with their immediate neighbours"""
    core = set(np.flatnonzero(g.adoption).tolist())
    for i in list(core):
        core.update(g.graph.neighbors(i))
    return sorted(core)


def edge_list(g: BankGraph, weights: WeightMatrix) -> pd.DataFrame:
    """One row per undirected edge with its symmetrized weight"""
    if weights.n != g.n:
        raise NetRiskError(f"Weight matrix has {weights.n} entities, graph has {g.n}")
    symmetric = np.maximum(weights.matrix, weights.matrix.T)
    rows, cols = np.nonzero(np.triu(g.adjacency, 1))
    return pd.DataFrame({
        "source": [g.label(i) for i in rows],
        "target": [g.label(j) for j in cols],
        "weight": symmetric[rows, cols],
        "both_adopters": (g.adoption[rows] & g.adoption[cols]).astype(int),
    })
