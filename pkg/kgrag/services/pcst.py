# kgrag/services/pcst.py
"""Depth-restricted prize-collecting Steiner subgraph extraction.

The objective of a connected node set S is ``Σ prize(S) − c·(|S| − 1)``:
every spanning tree of S has |S| − 1 edges and all edges cost the same
``c``, the mean prize over the candidate set.
"""
import math
from typing import Callable, Collection, Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional, Set, Tuple

import networkx as nx
import structlog

from kgrag.core.config import RetrievalConfig
from kgrag.core.errors import EmptySeedSet, NoSeedInCandidates, UnknownEntity
from kgrag.db.graph import KnowledgeGraph
from kgrag.services.ppr import PrizeMap

logger = structlog.get_logger(__name__)


class PcstResult(NamedTuple):
    subgraph: KnowledgeGraph
    nodes: FrozenSet[str]
    objective: float
    edge_cost: float
    root: str


def depth_filter(graph: KnowledgeGraph, seeds: Iterable[str], max_depth: int) -> Set[str]:
    """Nodes within ``max_depth`` undirected hops of any seed, seeds included."""
    seeds = list(dict.fromkeys(seeds))
    if not seeds:
        raise EmptySeedSet("depth filter needs at least one seed")
    view = graph.undirected()
    reached: Set[str] = set()
    for seed in seeds:
        if seed not in graph:
            raise UnknownEntity(seed)
        reached.update(nx.single_source_shortest_path_length(view, seed, cutoff=max_depth))
    return reached


def uniform_edge_cost(prizes: Mapping[str, float], candidates: Collection[str]) -> float:
    return math.fsum(prizes.get(v, 0.0) for v in candidates) / len(candidates) if candidates else 0.0


def pcst_objective(prizes: Mapping[str, float], nodes: Collection[str], edge_cost: float) -> float:
    if not nodes:
        return 0.0
    return math.fsum(prizes.get(v, 0.0) for v in nodes) - edge_cost * (len(nodes) - 1)


def _grow(
    view: nx.Graph,
    root: str,
    prizes: Mapping[str, float],
    edge_cost: float,
    budget: int,
    key: Callable[[str], str],
    per_node: bool = False,
) -> Tuple[List[str], bool]:
    """Greedy path attachment from ``root`` within ``budget`` nodes.

    Each round runs a multi-source BFS from the tree; among shortest paths to
    a node the one collecting the most prize is kept. The path with the
    largest gain ``Σ prize(new) − c·len`` (divided by ``len`` when
    ``per_node``) that still fits the budget is attached even when the gain
    is not positive. Returns the best-objective prefix of the growth and
    whether the budget ever constrained it.
    """
    tree = [root]
    in_tree = {root}
    blocked = False
    value = prizes.get(root, 0.0)
    best_size, best_value = 1, value
    while len(tree) < budget:
        distance: Dict[str, int] = {v: 0 for v in tree}
        collected: Dict[str, float] = {v: 0.0 for v in tree}
        parent: Dict[str, str] = {}
        frontier = sorted(tree, key=key)
        depth = 0
        while frontier:
            depth += 1
            layer: Dict[str, Tuple[float, str]] = {}
            for u in frontier:
                for w in sorted(view[u], key=key):
                    if w in distance:
                        continue
                    reached = collected[u] + prizes.get(w, 0.0)
                    if w not in layer or reached > layer[w][0]:
                        layer[w] = (reached, u)
            for w, (reached, u) in layer.items():
                distance[w], collected[w], parent[w] = depth, reached, u
            frontier = sorted(layer, key=key)

        best, best_gain, best_score = None, 0.0, -math.inf
        for v in sorted((v for v in distance if v not in in_tree), key=key):
            if len(tree) + distance[v] > budget:
                blocked = True
                continue
            gain = collected[v] - edge_cost * distance[v]
            score = gain / distance[v] if per_node else gain
            if score > best_score:
                best, best_gain, best_score = v, gain, score
        if best is None:
            break

        path = []
        node = best
        while node not in in_tree:
            path.append(node)
            node = parent[node]
        for node in reversed(path):
            tree.append(node)
            in_tree.add(node)
        value += best_gain
        if value > best_value:
            best_size, best_value = len(tree), value
    return tree[:best_size], blocked or len(tree) >= budget


def pcst_extract(
    graph: KnowledgeGraph,
    prizes: PrizeMap,
    candidates: Iterable[str],
    config: Optional[RetrievalConfig] = None,
) -> PcstResult:
    """Connected, seed-containing subgraph of the candidate-induced graph with at most ``max_nodes`` nodes.

    The greedy grows from every candidate seed (highest prize first) under
    every budget up to ``max_nodes``, scoring attachments by total gain and
    then by gain per attached node, and keeps the best objective; earlier
    runs win ties. With a budget of one this is the best seed alone.
    """
    config = config or RetrievalConfig()
    candidates = set(candidates)
    for node in candidates:
        if node not in graph:
            raise UnknownEntity(node)
    roots = [s for s in prizes.seeds if s in candidates]
    if not roots:
        raise NoSeedInCandidates("none of the seeds survived candidate filtering")

    def key(node: str) -> str:
        return graph.entity(node).key

    scores = prizes.scores
    edge_cost = uniform_edge_cost(scores, candidates)
    view = graph.undirected().subgraph(candidates)
    roots.sort(key=lambda s: (-scores.get(s, 0.0), key(s)))

    best_nodes: Optional[List[str]] = None
    best_value, best_root = -math.inf, roots[0]
    for per_node in (False, True):
        for root in roots:
            for budget in range(1, config.max_nodes + 1):
                nodes, blocked = _grow(view, root, scores, edge_cost, budget, key, per_node)
                value = pcst_objective(scores, nodes, edge_cost)
                if value > best_value:
                    best_nodes, best_value, best_root = nodes, value, root
                if not blocked:
                    break

    logger.info(
        "pcst_extracted",
        candidates=len(candidates),
        nodes=len(best_nodes),
        objective=best_value,
        edge_cost=edge_cost,
    )
    return PcstResult(
        subgraph=graph.induced_subgraph(best_nodes),
        nodes=frozenset(best_nodes),
        objective=best_value,
        edge_cost=edge_cost,
        root=best_root,
    )
