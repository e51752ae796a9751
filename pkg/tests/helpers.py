"""Graph builders, generators and brute-force oracles shared by the test modules."""
from __future__ import annotations

import functools
import itertools
import random
import re
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from kgrag.db.graph import KnowledgeGraph
from kgrag.db.models import CANONICAL_RELATIONS, Entity, Provenance

LAYER_CODES = ("L1", "L2", "L3", "L4", "L5", "Protein")

DRAVET_QUERY = "What treatment is recommended for Dravet syndrome?"


def graph_from(
    nodes: Iterable[Tuple],
    edges: Iterable[Tuple] = (),
    freeze: bool = True,
) -> KnowledgeGraph:
    """Nodes are ``(name, layer[, aliases[, definition]])``; edges ``(head, relation, tail, count[, provenance])``."""
    graph = KnowledgeGraph()
    for node in nodes:
        name, layer = node[0], node[1]
        aliases = node[2] if len(node) > 2 else ()
        definition = node[3] if len(node) > 3 else ""
        graph.add_entity(Entity(canonical_name=name, layer=layer, aliases=aliases, definition=definition))
    for edge in edges:
        head, relation, tail, count = edge[:4]
        provenance = edge[4] if len(edge) > 4 else Provenance.MANUAL
        graph.add_triplet(graph.lookup_canonical(head), relation, graph.lookup_canonical(tail), count, provenance)
    return graph.freeze() if freeze else graph


def ids(graph: KnowledgeGraph, *names: str) -> List[str]:
    return [graph.lookup_canonical(name) for name in names]


def names(graph: KnowledgeGraph, entity_ids: Iterable[str]) -> Set[str]:
    return {graph.name_of(entity_id) for entity_id in entity_ids}


def random_connected_graph(
    rng: random.Random,
    n_nodes: int,
    extra_edge_probability: float = 0.2,
    parallel_probability: float = 0.1,
    rich: bool = False,
) -> KnowledgeGraph:
    """Random spanning tree plus extra edges; some node pairs carry two relations.

    ``rich`` adds aliases, identifiers, definitions and mixed provenance.
    """
    graph = KnowledgeGraph()
    node_names = [f"N{i:02d}" for i in range(n_nodes)]
    for i, name in enumerate(node_names):
        graph.add_entity(
            Entity(
                canonical_name=name,
                layer=rng.choice(LAYER_CODES),
                identifier=f"RND:{i:04d}" if rich else "",
                ontology_source="random" if rich else "",
                aliases=[f"{name}-alias{j}" for j in range(rng.randint(0, 2))] if rich else [],
                definition=f"random entity number {i}" if rich else "",
            )
        )
    entity_ids = [graph.lookup_canonical(name) for name in node_names]
    relations = list(CANONICAL_RELATIONS) + ["related_to"]
    provenances = list(Provenance) if rich else [Provenance.MANUAL]

    def connect(a: str, b: str) -> None:
        head, tail = (a, b) if rng.random() < 0.5 else (b, a)
        graph.add_triplet(head, rng.choice(relations), tail, rng.randint(1, 20), rng.choice(provenances))

    for i in range(1, n_nodes):
        connect(entity_ids[i], entity_ids[rng.randrange(i)])
    for i, j in itertools.combinations(range(n_nodes), 2):
        if rng.random() < extra_edge_probability:
            connect(entity_ids[i], entity_ids[j])
    for triplet in list(graph.triplets()):
        if rng.random() < parallel_probability:
            relation = rng.choice([r for r in relations if r != triplet.relation.name])
            graph.add_triplet(triplet.tail, relation, triplet.head, rng.randint(1, 20))
    return graph.freeze()


# ---------- oracles ----------

def dense_ppr(graph: KnowledgeGraph, seeds: Sequence[str], alpha: float) -> Dict[str, float]:
    """Solve (I − (1−α)(Wᵀ + s·dᵀ)) r = α·s directly; d marks isolated nodes."""
    nodes = sorted(graph.entity_ids)
    position = {node: i for i, node in enumerate(nodes)}
    n = len(nodes)
    adjacency = np.zeros((n, n))
    for u, v in graph.undirected().edges:
        adjacency[position[u], position[v]] = adjacency[position[v], position[u]] = 1.0
    degree = adjacency.sum(axis=1)
    walk = np.zeros((n, n))
    for i in range(n):
        if degree[i] > 0:
            walk[i] = adjacency[i] / degree[i]
    dangling = (degree == 0).astype(float)
    restart = np.zeros(n)
    for seed in set(seeds):
        restart[position[seed]] = 1.0 / len(set(seeds))
    system = np.eye(n) - (1.0 - alpha) * (walk.T + np.outer(restart, dangling))
    rank = np.linalg.solve(system, alpha * restart)
    rank /= rank.sum()
    return {node: float(rank[position[node]]) for node in nodes}


def exhaustive_pcst(
    graph: KnowledgeGraph,
    prizes: Mapping[str, float],
    candidates: Iterable[str],
    seeds: Iterable[str],
    budget: int,
    edge_cost: float,
) -> float:
    """Best objective over every connected, seed-holding candidate subset within the budget."""
    candidates = sorted(candidates)
    seeds = set(seeds)
    view = graph.undirected().subgraph(candidates)
    best = float("-inf")
    for size in range(1, min(budget, len(candidates)) + 1):
        for subset in itertools.combinations(candidates, size):
            if not seeds.intersection(subset):
                continue
            if size > 1 and not nx.is_connected(view.subgraph(subset)):
                continue
            value = sum(prizes.get(v, 0.0) for v in subset) - edge_cost * (size - 1)
            best = max(best, value)
    return best


def brute_force_paths(
    graph: KnowledgeGraph, seeds: Sequence[str], max_depth: int
) -> List[Tuple[str, Tuple[str, ...], Tuple[Tuple[str, bool], ...]]]:
    """Every (seed, node sequence, per-hop relation choice) via networkx simple paths."""
    view = graph.undirected()
    seed_set = set(seeds)
    others = [v for v in view.nodes if v not in seed_set]
    leaves = [v for v in others if view.degree(v) == 1]
    sinks = leaves or others
    found = []
    for seed in seeds:
        for sink in sinks:
            for node_path in nx.all_simple_paths(view, seed, sink, cutoff=max_depth):
                options = []
                for u, w in zip(node_path, node_path[1:]):
                    hop = [(t.relation.name, t.head != u) for t in graph.triplets() if {t.head, t.tail} == {u, w}]
                    options.append(hop)
                for choice in itertools.product(*options):
                    found.append((seed, tuple(node_path), tuple(choice)))
    return found


_HOP = re.compile(
    r"\((?P<head>[^,()]+), (?P<relation>[^\[\]^]+)(?P<inverse>\^-1)?\[(?P<count>\d+)p\], (?P<tail>[^,()]+)\)"
)


def parse_context(text: str) -> List[List[Tuple[str, str, bool, int, str]]]:
    """Invert the path rendering: one list of (head, relation, inverse, count, tail) per line."""
    parsed = []
    for line in text.split("\n"):
        if not line:
            continue
        hops = []
        for chunk in line.split(" -> "):
            match = _HOP.fullmatch(chunk)
            assert match is not None, chunk
            hops.append(
                (
                    match["head"],
                    match["relation"],
                    match["inverse"] is not None,
                    int(match["count"]),
                    match["tail"],
                )
            )
        parsed.append(hops)
    return parsed


def lcs_oracle(a: Sequence[str], b: Sequence[str]) -> int:
    a, b = tuple(a), tuple(b)

    @functools.lru_cache(maxsize=None)
    def solve(i: int, j: int) -> int:
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + solve(i + 1, j + 1)
        return max(solve(i + 1, j), solve(i, j + 1))

    return solve(0, 0)


def levenshtein_oracle(a: str, b: str) -> int:
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        current = [i]
        for j, y in enumerate(b, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (x != y)))
        previous = current
    return previous[-1]


def similarity_oracle(a: str, b: str) -> float:
    a, b = a.casefold(), b.casefold()
    return 1.0 - levenshtein_oracle(a, b) / max(len(a), len(b))


class KeywordEmbedder:
    """Two-dimensional embedder: [1, 0] for texts containing ``keyword``, else [0, 1]."""

    def __init__(self, keyword: str):
        self.keyword = keyword.casefold()
        self.name = f"keyword-{self.keyword}"
        self.dimension = 2

    def encode(self, text: str) -> np.ndarray:
        return np.array([1.0, 0.0]) if self.keyword in text.casefold() else np.array([0.0, 1.0])


class TableEmbedder:
    """Looks the text up in a fixed table; unknown texts map to ``fallback``."""

    def __init__(self, table: Mapping[str, np.ndarray], fallback: Optional[np.ndarray] = None):
        self.table = dict(table)
        self.dimension = len(next(iter(self.table.values())))
        self.fallback = fallback if fallback is not None else np.ones(self.dimension)
        self.name = f"table-{id(self)}"

    def encode(self, text: str) -> np.ndarray:
        return np.asarray(self.table.get(text, self.fallback), dtype=float)
