# kgrag/services/ppr.py
"""Personalized PageRank over the undirected view of a frozen graph."""
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Tuple

import networkx as nx
import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict
from scipy import sparse

from kgrag.core.config import RetrievalConfig
from kgrag.core.errors import EmptyGraph, EmptySeedSet, UnknownEntity
from kgrag.db.graph import KnowledgeGraph

logger = structlog.get_logger(__name__)


class PrizeMap(BaseModel):
    """Relevance score per entity; sums to 1 over the graph when produced by PPR."""
    model_config = ConfigDict(frozen=True)

    scores: Dict[str, float]
    seeds: Tuple[str, ...]
    converged: bool = True
    iterations: int = 0

    def __getitem__(self, entity_id: str) -> float:
        return self.scores.get(entity_id, 0.0)

    def total(self) -> float:
        return float(sum(self.scores.values()))

    @classmethod
    def of(cls, scores: Mapping[str, float], seeds: Iterable[str]) -> "PrizeMap":
        """Wrap externally computed prizes (no normalization)."""
        return cls(scores=dict(scores), seeds=tuple(dict.fromkeys(seeds)))


class TransitionMatrix(NamedTuple):
    nodes: List[str]
    index: Dict[str, int]
    transposed: sparse.csr_array
    dangling: np.ndarray


def transition_matrix(graph: KnowledgeGraph) -> TransitionMatrix:
    """Row-stochastic W of the simple undirected view, stored as Wᵀ.

    Node order is case-folded canonical name; isolated nodes are flagged dangling.
    """
    def build() -> TransitionMatrix:
        nodes = [e.id for e in graph.sorted_entities()]
        adjacency = nx.to_scipy_sparse_array(graph.undirected(), nodelist=nodes, weight=None, format="csr")
        degree = np.asarray(adjacency.sum(axis=1)).ravel().astype(np.float64)
        inverse = np.divide(1.0, degree, out=np.zeros_like(degree), where=degree > 0)
        walk = sparse.diags_array(inverse) @ adjacency
        return TransitionMatrix(
            nodes=nodes,
            index={node: i for i, node in enumerate(nodes)},
            transposed=sparse.csr_array(walk.T),
            dangling=degree == 0,
        )

    return graph.memo(("transition_matrix",), build)


def personalized_pagerank(
    graph: KnowledgeGraph,
    seeds: Iterable[str],
    config: Optional[RetrievalConfig] = None,
) -> PrizeMap:
    """Power iteration of ``r ← α·s + (1−α)·(Wᵀr + dangling_mass·s)`` starting from ``s``.

    Stops once the L1 change drops below ``ppr_tolerance``. Hitting the
    iteration cap is not an error: the map comes back with ``converged=False``.
    """
    config = config or RetrievalConfig()
    graph.require_frozen()
    if len(graph) == 0:
        raise EmptyGraph("cannot rank an empty graph")
    seeds = tuple(dict.fromkeys(seeds))
    if not seeds:
        raise EmptySeedSet("personalized pagerank needs at least one seed")
    for seed in seeds:
        if seed not in graph:
            raise UnknownEntity(seed)

    matrix = transition_matrix(graph)
    restart = np.zeros(len(matrix.nodes))
    restart[[matrix.index[s] for s in seeds]] = 1.0 / len(seeds)

    alpha = config.alpha
    rank = restart.copy()
    converged, delta, iterations = False, float("inf"), 0
    for iterations in range(1, config.ppr_max_iterations + 1):
        dangling_mass = rank[matrix.dangling].sum()
        updated = alpha * restart + (1.0 - alpha) * (matrix.transposed @ rank + dangling_mass * restart)
        delta = float(np.abs(updated - rank).sum())
        rank = updated
        if delta < config.ppr_tolerance:
            converged = True
            break

    rank = rank / rank.sum()
    if not converged:
        logger.warning("ppr_not_converged", iterations=iterations, delta=delta, tolerance=config.ppr_tolerance)
    else:
        logger.debug("ppr_converged", iterations=iterations, seeds=len(seeds))

    return PrizeMap(
        scores={node: float(rank[i]) for i, node in enumerate(matrix.nodes)},
        seeds=seeds,
        converged=converged,
        iterations=iterations,
    )
