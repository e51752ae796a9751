from __future__ import annotations

import random

import networkx as nx
import pytest

from kgrag.core.config import RetrievalConfig
from kgrag.core.errors import EmptySeedSet, NoSeedInCandidates, UnknownEntity
from kgrag.db.graph import KnowledgeGraph
from kgrag.services.pcst import depth_filter, pcst_extract, pcst_objective, uniform_edge_cost
from kgrag.services.ppr import PrizeMap, personalized_pagerank
from tests.helpers import exhaustive_pcst, graph_from, ids, names, random_connected_graph


def _chain(length: int) -> KnowledgeGraph:
    nodes = [(f"N{i}", "L1") for i in range(length)]
    edges = [(f"N{i}", "associated_with", f"N{i + 1}", 1) for i in range(length - 1)]
    return graph_from(nodes, edges)


def test_depth_filter_on_chain() -> None:
    graph = _chain(6)
    (start,) = ids(graph, "N0")
    assert names(graph, depth_filter(graph, [start], 2)) == {"N0", "N1", "N2"}
    assert names(graph, depth_filter(graph, [start], 10)) == {f"N{i}" for i in range(6)}


def test_depth_filter_ignores_direction_and_unions_seeds() -> None:
    graph = graph_from(
        [("Hub", "L1"), ("A", "L4"), ("B", "L4"), ("Far", "L5")],
        [("A", "treats", "Hub", 1), ("Hub", "treated_with", "B", 1), ("Far", "treats", "B", 1)],
    )
    hub, far = ids(graph, "Hub", "Far")
    assert names(graph, depth_filter(graph, [hub], 1)) == {"Hub", "A", "B"}
    assert names(graph, depth_filter(graph, [far], 1)) == {"Far", "B"}
    assert names(graph, depth_filter(graph, [hub, far], 1)) == {"Hub", "A", "B", "Far"}


@pytest.mark.parametrize("seed", range(20))
def test_depth_filter_matches_bfs(seed: int) -> None:
    rng = random.Random(seed)
    graph = random_connected_graph(rng, 30, extra_edge_probability=0.05)
    seeds = rng.sample(sorted(graph.entity_ids), 2)
    depth = rng.randint(1, 4)
    lengths = [nx.single_source_shortest_path_length(graph.undirected(), s) for s in seeds]
    expected = {v for v in graph.entity_ids if min(d.get(v, depth + 1) for d in lengths) <= depth}
    assert depth_filter(graph, seeds, depth) == expected


def test_depth_filter_errors(small_graph: KnowledgeGraph) -> None:
    with pytest.raises(EmptySeedSet):
        depth_filter(small_graph, [], 2)
    with pytest.raises(UnknownEntity):
        depth_filter(small_graph, ["no-such-id"], 2)


def test_uniform_edge_cost_and_objective() -> None:
    prizes = {"a": 0.5, "b": 0.3, "c": 0.1}
    assert uniform_edge_cost(prizes, ["a", "b", "c", "d"]) == pytest.approx(0.225)
    assert uniform_edge_cost(prizes, []) == 0.0
    assert pcst_objective(prizes, ["a", "b"], 0.2) == pytest.approx(0.6)
    assert pcst_objective(prizes, [], 0.2) == 0.0


def test_dominant_prizes_form_the_subgraph() -> None:
    graph = graph_from(
        [("A", "L1"), ("B", "L4"), ("C", "L5")],
        [("B", "treats", "A", 3), ("B", "leads_to", "C", 1)],
    )
    a, b, c = ids(graph, "A", "B", "C")
    prizes = PrizeMap.of({a: 0.5, b: 0.5, c: 0.0}, [a])
    result = pcst_extract(graph, prizes, [a, b, c])
    assert result.nodes == {a, b}
    assert result.edge_cost == pytest.approx(1 / 3)
    assert result.objective == pytest.approx(1 - 1 / 3)
    assert result.subgraph.edge_count == 1


def test_budget_of_one_keeps_best_seed() -> None:
    graph = _chain(4)
    n0, n1, n2, n3 = ids(graph, "N0", "N1", "N2", "N3")
    prizes = PrizeMap.of({n0: 0.1, n1: 0.2, n2: 0.3, n3: 0.4}, [n0, n2])
    result = pcst_extract(graph, prizes, [n0, n1, n2, n3], RetrievalConfig(max_nodes=1))
    assert result.nodes == {n2}
    assert result.root == n2
    assert result.objective == pytest.approx(0.3)


def test_seed_outside_candidates() -> None:
    graph = _chain(3)
    n0, n1, n2 = ids(graph, "N0", "N1", "N2")
    with pytest.raises(NoSeedInCandidates):
        pcst_extract(graph, PrizeMap.of({n0: 1.0}, [n0]), [n1, n2])
    with pytest.raises(UnknownEntity):
        pcst_extract(graph, PrizeMap.of({n0: 1.0}, [n0]), [n0, "no-such-id"])


def test_demo_subgraph_for_dravet(demo_graph: KnowledgeGraph) -> None:
    (dravet,) = ids(demo_graph, "Dravet Syndrome")
    prizes = personalized_pagerank(demo_graph, [dravet])
    candidates = depth_filter(demo_graph, [dravet], 4)
    assert "Everolimus" not in names(demo_graph, candidates)
    result = pcst_extract(demo_graph, prizes, candidates)
    assert result.edge_cost == pytest.approx(0.071125, abs=1e-5)
    assert names(demo_graph, result.nodes) == {
        "Dravet Syndrome",
        "SCN1A",
        "Stiripentol",
        "Clobazam",
        "Valproate",
        "Lennox-Gastaut Syndrome",
    }
    assert result.objective == pytest.approx(0.44365, abs=1e-4)
    small = pcst_extract(demo_graph, prizes, candidates, RetrievalConfig(max_nodes=5))
    assert names(demo_graph, small.nodes) == {"Dravet Syndrome", "SCN1A", "Stiripentol", "Clobazam", "Valproate"}
    assert small.objective == pytest.approx(0.44005, abs=1e-4)


def test_demo_budget_is_not_spent_on_two_node_paths(demo_graph: KnowledgeGraph) -> None:
    # Clobazam then Lennox-Gastaut has a larger total gain than Stiripentol alone
    # but a smaller gain per attached node.
    (dravet,) = ids(demo_graph, "Dravet Syndrome")
    prizes = personalized_pagerank(demo_graph, [dravet])
    candidates = depth_filter(demo_graph, [dravet], 4)
    result = pcst_extract(demo_graph, prizes, candidates, RetrievalConfig(max_nodes=4))
    assert names(demo_graph, result.nodes) == {"Dravet Syndrome", "SCN1A", "Stiripentol", "Clobazam"}
    assert result.objective == pytest.approx(0.41425, abs=1e-4)


@pytest.mark.parametrize("seed", range(200))
def test_random_instances_against_exhaustive(seed: int) -> None:
    rng = random.Random(7000 + seed)
    graph = random_connected_graph(rng, rng.randint(2, 10), extra_edge_probability=0.15)
    entity_ids = sorted(graph.entity_ids)
    seeds = rng.sample(entity_ids, rng.randint(1, 2))
    if seed % 2:
        candidates = depth_filter(graph, seeds, rng.randint(1, 4))
    else:
        candidates = set(rng.sample(entity_ids, rng.randint(1, len(entity_ids)))) | {seeds[0]}
    prizes = PrizeMap.of({v: rng.random() for v in entity_ids}, seeds)
    budget = rng.randint(1, len(entity_ids))

    result = pcst_extract(graph, prizes, candidates, RetrievalConfig(max_nodes=budget))
    nodes = result.nodes

    assert 1 <= len(nodes) <= budget
    assert nodes <= candidates
    if seed % 2:
        assert nodes <= depth_filter(graph, seeds, 4)
    assert nodes & set(seeds)
    assert nx.is_connected(graph.undirected().subgraph(nodes))
    assert result.objective == pytest.approx(pcst_objective(prizes.scores, nodes, result.edge_cost))
    assert set(result.subgraph.entity_ids) == nodes

    optimum = exhaustive_pcst(graph, prizes.scores, candidates, seeds, budget, result.edge_cost)
    assert result.objective <= optimum + 1e-12
    assert result.objective >= 0.5 * optimum - 1e-12

    if budget > 1:
        smaller = pcst_extract(graph, prizes, candidates, RetrievalConfig(max_nodes=budget - 1))
        assert result.objective >= smaller.objective - 1e-12
