from __future__ import annotations

import random

import pytest

from kgrag.core.errors import (
    DuplicateName,
    EmptyName,
    GraphFrozen,
    GraphNotFrozen,
    NonpositiveCount,
    SelfLoop,
    UnknownEntity,
)
from kgrag.db.graph import Direction, KnowledgeGraph
from kgrag.db.models import CANONICAL_RELATIONS, Entity, Layer, LayerLabel, Provenance, RelationLabel
from tests.helpers import graph_from, ids, names, random_connected_graph


def _valproate() -> Entity:
    return Entity(canonical_name="Valproate", layer="L4", aliases=["VPA"])


def test_add_entity_indexes_name_and_aliases() -> None:
    graph = KnowledgeGraph()
    entity_id = graph.add_entity(_valproate())

    assert graph.lookup_canonical("valproate") == entity_id
    assert graph.lookup_alias("vpa") == entity_id
    assert graph.name_index["valproate"] == entity_id
    assert graph.name_index["vpa"] == entity_id


def test_add_entity_rejects_case_folded_duplicate() -> None:
    graph = KnowledgeGraph()
    graph.add_entity(_valproate())
    with pytest.raises(DuplicateName):
        graph.add_entity(Entity(canonical_name="valproate", layer="L4"))


def test_add_entity_rejects_alias_collision() -> None:
    graph = KnowledgeGraph()
    graph.add_entity(_valproate())
    with pytest.raises(DuplicateName):
        graph.add_entity(Entity(canonical_name="Divalproex", layer="L4", aliases=["VPA"]))
    with pytest.raises(DuplicateName):
        graph.add_entity(Entity(canonical_name="Sodium Valproate", layer="L4", aliases=["Valproate"]))


def test_add_entity_rejects_empty_name() -> None:
    with pytest.raises(EmptyName):
        KnowledgeGraph().add_entity(Entity(canonical_name="   ", layer="L4"))


def test_entity_ids_are_stable_across_graphs() -> None:
    first = KnowledgeGraph().add_entity(_valproate())
    second = KnowledgeGraph().add_entity(Entity(canonical_name=" Valproate ", layer="L4"))
    assert first == second


def test_layer_parsing() -> None:
    assert Layer.parse("L3").label is LayerLabel.GENE
    assert Layer.parse("treatment").label is LayerLabel.TREATMENT
    protein = Layer.parse("Protein")
    assert protein.label is LayerLabel.OTHER and protein.code == "Protein"
    assert Layer.parse("Other:Anatomy").code == "Anatomy"
    for bad in ("", "L9", "other"):
        with pytest.raises(ValueError):
            Layer.parse(bad)


def test_relation_label_canonical_flag() -> None:
    assert all(RelationLabel(name=name).canonical for name in CANONICAL_RELATIONS)
    assert not RelationLabel(name="Treats").canonical
    assert not RelationLabel(name="treated_with").canonical
    with pytest.raises(ValueError):
        RelationLabel(name="  ")


def test_add_triplet_stores_and_merges() -> None:
    graph = graph_from([("Valproate", "L4"), ("Dravet Syndrome", "L1")], freeze=False)
    valproate, dravet = ids(graph, "Valproate", "Dravet Syndrome")

    key = graph.add_triplet(valproate, "treats", dravet, 3, Provenance.RULE_BASED)
    stored = graph.get_triplet(key)
    assert stored.paper_count == 3 and not stored.low_evidence

    graph.add_triplet(valproate, "treats", dravet, 2, Provenance.EXTERNAL_EXTRACTOR)
    merged = graph.get_triplet(key)
    assert graph.edge_count == 1
    assert merged.paper_count == 5
    assert merged.provenance is Provenance.RULE_BASED

    graph.add_triplet(valproate, "treats", dravet, 1, Provenance.MANUAL)
    assert graph.get_triplet(key).provenance is Provenance.MANUAL
    assert graph.get_triplet(key).paper_count == 6


def test_dedup_sums_counts_over_many_inserts() -> None:
    rng = random.Random(7)
    graph = graph_from([("A", "L1"), ("B", "L4")], freeze=False)
    a, b = ids(graph, "A", "B")
    counts = [rng.randint(1, 9) for _ in range(25)]
    for count in counts:
        key = graph.add_triplet(b, "treats", a, count)
    assert graph.edge_count == 1
    assert graph.get_triplet(key).paper_count == sum(counts)


def test_low_evidence_tracks_paper_count() -> None:
    graph = graph_from([("A", "L1"), ("B", "L4")], freeze=False)
    a, b = ids(graph, "A", "B")
    key = graph.add_triplet(b, "treats", a, 1)
    assert graph.get_triplet(key).low_evidence
    graph.add_triplet(b, "treats", a, 1)
    assert not graph.get_triplet(key).low_evidence


def test_add_triplet_errors() -> None:
    graph = graph_from([("A", "L1"), ("B", "L4")], freeze=False)
    a, b = ids(graph, "A", "B")
    with pytest.raises(SelfLoop):
        graph.add_triplet(a, "treats", a, 1)
    with pytest.raises(UnknownEntity):
        graph.add_triplet(a, "treats", "missing", 1)
    for bad in (0, -3, 1.5, True):
        with pytest.raises(NonpositiveCount):
            graph.add_triplet(b, "treats", a, bad)


def test_frozen_graph_rejects_mutation() -> None:
    graph = graph_from([("A", "L1"), ("B", "L4")])
    a, b = ids(graph, "A", "B")
    with pytest.raises(GraphFrozen):
        graph.add_triplet(b, "treats", a, 1)
    with pytest.raises(GraphFrozen):
        graph.add_entity(Entity(canonical_name="C", layer="L2"))


def test_require_frozen() -> None:
    graph = graph_from([("A", "L1")], freeze=False)
    with pytest.raises(GraphNotFrozen):
        graph.require_frozen()
    graph.freeze()
    graph.require_frozen()


def test_thawed_copy_is_independent(small_graph: KnowledgeGraph) -> None:
    copy = small_graph.thawed_copy()
    assert copy == small_graph and not copy.is_frozen
    valproate, lgs = ids(copy, "Valproate", "Lennox-Gastaut Syndrome")
    copy.add_triplet(valproate, "treats", lgs, 4)
    assert copy.edge_count == small_graph.edge_count + 1


def test_resolve_order() -> None:
    graph = KnowledgeGraph()
    graph.add_entity(Entity(canonical_name="SCN1A", layer="L3", identifier="HGNC:10585", aliases=["Nav1.1"]))
    scn1a = graph.lookup_canonical("SCN1A")
    assert graph.resolve("scn1a") == scn1a
    assert graph.resolve("NAV1.1") == scn1a
    assert graph.resolve("hgnc:10585") == scn1a
    assert graph.resolve(scn1a) == scn1a
    assert graph.resolve("SCN2A") is None


def test_neighbors_out_and_in_on_star() -> None:
    graph = graph_from(
        [("A", "L4"), ("B", "L1"), ("C", "L1")],
        [("A", "treats", "C", 2), ("A", "treats", "B", 2)],
    )
    a, b, c = ids(graph, "A", "B", "C")
    out = graph.neighbors(a, Direction.OUT)
    assert [other for _, other in out] == [b, c]
    assert [t.key for t, _ in out] == [(a, "treats", b), (a, "treats", c)]
    assert graph.neighbors(a, "in") == []


def test_neighbors_both_on_hub(small_graph: KnowledgeGraph) -> None:
    dravet = small_graph.lookup_canonical("Dravet Syndrome")
    listed = [(small_graph.name_of(other), t.relation.name) for t, other in small_graph.neighbors(dravet, "both")]
    assert listed == [
        ("Lennox-Gastaut Syndrome", "differential_of"),
        ("SCN1A", "associated_with"),
        ("Stiripentol", "treats"),
        ("Valproate", "treats"),
    ]


def test_neighbors_both_keeps_both_directions() -> None:
    graph = graph_from(
        [("A", "L4"), ("B", "L1")],
        [("A", "treats", "B", 2), ("B", "treated_with", "A", 3)],
    )
    a = graph.lookup_canonical("A")
    assert [t.relation.name for t, _ in graph.neighbors(a, Direction.BOTH)] == ["treated_with", "treats"]
    with pytest.raises(UnknownEntity):
        graph.neighbors("missing")


def test_induced_subgraph_triangle() -> None:
    graph = graph_from(
        [("A", "L1"), ("B", "L2"), ("C", "L3")],
        [("A", "r", "B", 1), ("B", "r", "C", 1), ("C", "r", "A", 1)],
    )
    sub = graph.induced_subgraph(ids(graph, "A", "B"))
    assert len(sub) == 2 and sub.edge_count == 1
    assert sub.is_frozen
    assert graph.induced_subgraph(graph.entity_ids) == graph
    with pytest.raises(UnknownEntity):
        graph.induced_subgraph(["missing"])


def test_induced_subgraph_matches_edge_filter() -> None:
    rng = random.Random(11)
    graph = random_connected_graph(rng, 20, extra_edge_probability=0.15)
    subset = set(rng.sample(graph.entity_ids, 8))
    sub = graph.induced_subgraph(subset)
    expected = {t.key for t in graph.triplets() if t.head in subset and t.tail in subset}
    assert set(sub.entity_ids) == subset
    assert {t.key for t in sub.triplets()} == expected


def test_stats_on_empty_graph() -> None:
    stats = KnowledgeGraph().compute_stats()
    assert stats.empty
    assert stats.node_count == stats.edge_count == 0
    assert stats.median_paper_count == 0
    assert stats.cross_layer_fraction == 0.0


def test_stats_hand_counts(small_graph: KnowledgeGraph) -> None:
    stats = small_graph.compute_stats()
    assert stats.node_count == 5 and stats.edge_count == 5
    assert stats.per_layer_node_counts == {"L1": 2, "L3": 1, "L4": 2}
    assert stats.per_relation_edge_counts == {
        "associated_with": 1,
        "co_prescribed_with": 1,
        "differential_of": 1,
        "treats": 2,
    }
    assert stats.cross_layer_count == 3
    assert stats.cross_layer_fraction == pytest.approx(0.6)
    assert stats.median_paper_count == 3
    assert stats.paper_count_quartiles == (1, 8)
    assert stats.mean_paper_count == pytest.approx(5.0)
    assert stats.per_layer_mean_paper_count == pytest.approx({"L1": 6.0, "L3": 3.0, "L4": 7.0})
    assert stats.per_relation_mean_paper_count["treats"] == pytest.approx(10.0)
    assert stats.flagged_count == 2
    assert not stats.empty


def test_stats_median_of_three_counts() -> None:
    graph = graph_from(
        [("A", "L1"), ("B", "L4"), ("C", "L3")],
        [("B", "treats", "A", 8), ("C", "associated_with", "A", 1), ("B", "contraindicated_with", "C", 3)],
    )
    assert graph.compute_stats().median_paper_count == 3


def test_stats_lower_median_for_even_counts() -> None:
    graph = graph_from(
        [("A", "L1"), ("B", "L4"), ("C", "L3")],
        [("B", "treats", "A", 8), ("C", "associated_with", "A", 2)],
    )
    assert graph.compute_stats().median_paper_count == 2


@pytest.mark.parametrize("seed", range(10))
def test_stats_totals_on_generated_graphs(seed: int) -> None:
    graph = random_connected_graph(random.Random(seed), 5 + seed * 3)
    stats = graph.compute_stats()
    assert stats.node_count == len(graph)
    assert stats.edge_count == graph.edge_count
    assert sum(stats.per_layer_node_counts.values()) == len(graph)
    assert sum(stats.per_relation_edge_counts.values()) == graph.edge_count
    assert 0 <= stats.cross_layer_count <= stats.edge_count
    assert 0.0 <= stats.cross_layer_fraction <= 1.0
    assert stats.flagged_count == sum(t.paper_count < 2 for t in graph.triplets())


def test_memo_builds_once_on_frozen_graph(small_graph: KnowledgeGraph) -> None:
    calls = []

    def build():
        calls.append(1)
        return object()

    first = small_graph.memo("cached-view", build)
    assert small_graph.memo("cached-view", build) is first
    assert len(calls) == 1


def test_vocabulary_lists_names_and_aliases(small_graph: KnowledgeGraph) -> None:
    forms = {form for form, _ in small_graph.vocabulary()}
    assert {"Valproate", "VPA", "Valproic acid", "Nav1.1", "Dravet"} <= forms
    assert names(small_graph, {entity_id for _, entity_id in small_graph.vocabulary()}) == {
        "Valproate",
        "Stiripentol",
        "Dravet Syndrome",
        "Lennox-Gastaut Syndrome",
        "SCN1A",
    }
