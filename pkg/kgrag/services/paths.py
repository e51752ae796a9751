# kgrag/services/paths.py
"""Seed-to-sink reasoning paths and their text rendering."""
import itertools
from typing import Iterable, List, NamedTuple, Sequence, Tuple

import networkx as nx
from pydantic import BaseModel, ConfigDict

from kgrag.core.errors import DanglingTriplet, EmptySeedSet
from kgrag.db.graph import KnowledgeGraph
from kgrag.db.models import TripletKey


class Hop(NamedTuple):
    key: TripletKey
    reversed: bool = False


class ReasoningPath(BaseModel):
    """Triplet chain from ``seed``; ``reversed`` hops walk a triplet tail → head."""
    model_config = ConfigDict(frozen=True)

    seed: str
    hops: Tuple[Hop, ...]

    @property
    def nodes(self) -> List[str]:
        walked = [self.seed]
        for hop in self.hops:
            walked.append(hop.key.head if hop.reversed else hop.key.tail)
        return walked

    def __len__(self) -> int:
        return len(self.hops)


def sinks_of(view: nx.Graph, seeds: Iterable[str]) -> List[str]:
    """Degree-1 non-seed nodes, or every non-seed node when there are none."""
    seeds = set(seeds)
    others = [v for v in view.nodes if v not in seeds]
    leaves = [v for v in others if view.degree(v) == 1]
    return leaves or others


def _simple_paths(view: nx.Graph, source: str, sinks: set, max_depth: int, key) -> List[List[str]]:
    found = []
    stack = [[source]]
    while stack:
        path = stack.pop()
        if len(path) > 1 and path[-1] in sinks:
            found.append(path)
        if len(path) - 1 == max_depth:
            continue
        on_path = set(path)
        for nxt in sorted(view[path[-1]], key=key, reverse=True):
            if nxt not in on_path:
                stack.append(path + [nxt])
    return found


def _expand(graph: KnowledgeGraph, seed: str, node_path: Sequence[str]) -> List[ReasoningPath]:
    choices = []
    for u, w in zip(node_path, node_path[1:]):
        choices.append([Hop(t.key, t.head != u) for t in graph.triplets_between(u, w)])
    return [ReasoningPath(seed=seed, hops=hops) for hops in itertools.product(*choices)]


def enumerate_paths(subgraph: KnowledgeGraph, seeds: Iterable[str], max_depth: int) -> List[ReasoningPath]:
    """All simple paths of at most ``max_depth`` hops from each seed to each sink.

    A node pair joined by several triplets yields one path per triplet.
    Ordered by seed name, then the node-name sequence, then relations.
    """
    seeds = list(dict.fromkeys(seeds))
    if not seeds:
        raise EmptySeedSet("path enumeration needs at least one seed")
    seeds = [s for s in seeds if s in subgraph]
    view = subgraph.undirected()
    sinks = set(sinks_of(view, seeds))

    def key(node: str) -> str:
        return subgraph.entity(node).key

    paths: List[ReasoningPath] = []
    for seed in seeds:
        for node_path in _simple_paths(view, seed, sinks, max_depth, key):
            paths.extend(_expand(subgraph, seed, node_path))

    def order(path: ReasoningPath):
        return (
            key(path.seed),
            tuple(key(n) for n in path.nodes),
            tuple((hop.key.relation, hop.reversed) for hop in path.hops),
        )

    return sorted(paths, key=order)


def serialize_path(path: ReasoningPath, graph: KnowledgeGraph) -> str:
    """``(head, relation[Np], tail)`` per hop joined by `` -> ``; reversed hops carry ``^-1``."""
    rendered = []
    for hop in path.hops:
        triplet = graph.get_triplet(hop.key)
        if triplet is None:
            raise DanglingTriplet(tuple(hop.key))
        relation = f"{triplet.relation.name}^-1" if hop.reversed else triplet.relation.name
        rendered.append(
            f"({graph.name_of(triplet.head)}, {relation}[{triplet.paper_count}p], {graph.name_of(triplet.tail)})"
        )
    return " -> ".join(rendered)


def serialize_context(paths: Iterable[ReasoningPath], graph: KnowledgeGraph) -> str:
    return "\n".join(serialize_path(path, graph) for path in paths)
