# kgrag/db/graph.py
"""In-memory typed knowledge graph.

A graph is built (entities first, then triplets) and then frozen. Frozen
graphs are immutable and can be read from any number of threads; retrieval
only accepts frozen graphs.
"""
from __future__ import annotations

import enum
import threading
from collections import Counter, defaultdict
from types import MappingProxyType
from typing import Callable, Dict, Hashable, Iterable, Iterator, List, Mapping, Optional, Set, Tuple

import networkx as nx
import numpy as np
import structlog
from pydantic import BaseModel, Field

from kgrag.core.errors import (
    DuplicateName,
    EmptyName,
    GraphFrozen,
    GraphNotFrozen,
    NonpositiveCount,
    SelfLoop,
    UnknownEntity,
)
from kgrag.db.models import Entity, Provenance, RelationLabel, Triplet, TripletKey

logger = structlog.get_logger(__name__)


class Direction(str, enum.Enum):
    OUT = "out"
    IN = "in"
    BOTH = "both"


class GraphStats(BaseModel):
    node_count: int = 0
    edge_count: int = 0
    per_layer_node_counts: Dict[str, int] = Field(default_factory=dict)
    per_relation_edge_counts: Dict[str, int] = Field(default_factory=dict)
    cross_layer_count: int = 0
    cross_layer_fraction: float = 0.0
    # lower median: for an even count the smaller of the two middle values
    median_paper_count: int = 0
    paper_count_quartiles: Tuple[int, int] = (0, 0)
    mean_paper_count: float = 0.0
    per_layer_mean_paper_count: Dict[str, float] = Field(default_factory=dict)
    per_relation_mean_paper_count: Dict[str, float] = Field(default_factory=dict)
    flagged_count: int = 0
    empty: bool = True


class KnowledgeGraph:
    def __init__(self) -> None:
        self._entities: Dict[str, Entity] = {}
        self._triplets: Dict[TripletKey, Triplet] = {}
        self._out: Dict[str, Set[TripletKey]] = defaultdict(set)
        self._in: Dict[str, Set[TripletKey]] = defaultdict(set)
        self._canonical_index: Dict[str, str] = {}
        self._alias_index: Dict[str, str] = {}
        self._identifier_index: Dict[str, str] = {}
        self._frozen = False
        self._undirected: Optional[nx.Graph] = None
        self._memo: Dict[Hashable, object] = {}
        self._lock = threading.Lock()

    # ---------- build phase ----------

    def _require_build(self) -> None:
        if self._frozen:
            raise GraphFrozen("graph is frozen; use thawed_copy() to derive a mutable graph")

    def add_entity(self, entity: Entity) -> str:
        self._require_build()
        if not entity.canonical_name:
            raise EmptyName("entity canonical_name must be non-empty")

        name_key = entity.key
        if entity.id in self._entities:
            raise DuplicateName(entity.canonical_name, entity.id)
        for key in (name_key, *(a.casefold() for a in entity.aliases)):
            clash = self._canonical_index.get(key) or self._alias_index.get(key)
            if clash is not None:
                raise DuplicateName(key, clash)

        self._store_entity(entity)
        return entity.id

    def _store_entity(self, entity: Entity) -> None:
        self._entities[entity.id] = entity
        self._canonical_index[entity.key] = entity.id
        for alias in entity.aliases:
            key = alias.casefold()
            if key != entity.key:
                self._alias_index[key] = entity.id
        if entity.identifier:
            key = entity.identifier.casefold()
            if key in self._identifier_index:
                logger.warning("duplicate_identifier", identifier=entity.identifier, entity=entity.canonical_name)
            else:
                self._identifier_index[key] = entity.id

    def add_triplet(
        self,
        head_id: str,
        relation,
        tail_id: str,
        paper_count: int,
        provenance: Provenance = Provenance.MANUAL,
    ) -> TripletKey:
        """Insert or merge a triplet; duplicates sum their paper counts."""
        self._require_build()
        for entity_id in (head_id, tail_id):
            if entity_id not in self._entities:
                raise UnknownEntity(entity_id)
        if head_id == tail_id:
            raise SelfLoop(head_id)
        if isinstance(paper_count, bool) or not isinstance(paper_count, (int, np.integer)) or paper_count < 1:
            raise NonpositiveCount(paper_count)

        relation = RelationLabel.of(relation)
        provenance = Provenance(provenance)
        key = TripletKey(head_id, relation.name, tail_id)
        existing = self._triplets.get(key)
        if existing is not None:
            self._triplets[key] = existing.merged_with(int(paper_count), provenance)
        else:
            self._store_triplet(
                Triplet(
                    head=head_id, relation=relation, tail=tail_id, paper_count=int(paper_count), provenance=provenance
                )
            )
        return key

    def _store_triplet(self, triplet: Triplet) -> None:
        key = triplet.key
        self._triplets[key] = triplet
        self._out[triplet.head].add(key)
        self._in[triplet.tail].add(key)

    def freeze(self) -> "KnowledgeGraph":
        if not self._frozen:
            undirected = nx.Graph()
            undirected.add_nodes_from(self._entities)
            undirected.add_edges_from((t.head, t.tail) for t in self._triplets.values())
            self._undirected = nx.freeze(undirected)
            self._frozen = True
            logger.info("graph_frozen", nodes=len(self._entities), edges=len(self._triplets))
        return self

    @property
    def is_frozen(self) -> bool:
        return self._frozen

    def require_frozen(self) -> None:
        if not self._frozen:
            raise GraphNotFrozen("graph must be frozen before retrieval")

    def thawed_copy(self) -> "KnowledgeGraph":
        copy = KnowledgeGraph()
        for entity in self._entities.values():
            copy._store_entity(entity)
        for triplet in self._triplets.values():
            copy._store_triplet(triplet)
        return copy

    # ---------- lookups ----------

    def __len__(self) -> int:
        return len(self._entities)

    def __contains__(self, entity_id: object) -> bool:
        return entity_id in self._entities

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self._entities == other._entities and self._triplets == other._triplets

    __hash__ = None  # type: ignore[assignment]

    @property
    def edge_count(self) -> int:
        return len(self._triplets)

    @property
    def entity_ids(self) -> List[str]:
        return list(self._entities)

    @property
    def name_index(self) -> Mapping[str, str]:
        merged = dict(self._alias_index)
        merged.update(self._canonical_index)
        return MappingProxyType(merged)

    def entity(self, entity_id: str) -> Entity:
        try:
            return self._entities[entity_id]
        except KeyError:
            raise UnknownEntity(entity_id) from None

    def entities(self) -> Iterator[Entity]:
        return iter(self._entities.values())

    def sorted_entities(self) -> List[Entity]:
        return sorted(self._entities.values(), key=lambda e: (e.key, e.canonical_name))

    def name_of(self, entity_id: str) -> str:
        return self.entity(entity_id).canonical_name

    def triplets(self) -> Iterator[Triplet]:
        return iter(self._triplets.values())

    def get_triplet(self, key: Tuple[str, str, str]) -> Optional[Triplet]:
        return self._triplets.get(TripletKey(*key))

    def has_triplet(self, key: Tuple[str, str, str]) -> bool:
        return TripletKey(*key) in self._triplets

    def lookup_canonical(self, text: str) -> Optional[str]:
        return self._canonical_index.get(text.strip().casefold())

    def lookup_alias(self, text: str) -> Optional[str]:
        return self._alias_index.get(text.strip().casefold())

    def lookup_identifier(self, text: str) -> Optional[str]:
        return self._identifier_index.get(text.strip().casefold())

    def resolve(self, text: str) -> Optional[str]:
        """Canonical name, then alias, then identifier, then raw entity id."""
        return (
            self.lookup_canonical(text)
            or self.lookup_alias(text)
            or self.lookup_identifier(text)
            or (text if text in self._entities else None)
        )

    def vocabulary(self) -> List[Tuple[str, str]]:
        """All (surface form, entity id) pairs: canonical names and aliases."""
        return [(form, e.id) for e in self.sorted_entities() for form in e.surface_forms()]

    def neighbors(self, entity_id: str, direction: Direction = Direction.OUT) -> List[Tuple[Triplet, str]]:
        """Incident triplets with the entity at the other end.

        Sorted by the other entity's canonical name, then relation name;
        ``both`` keeps outgoing and incoming edges side by side.
        """
        self.entity(entity_id)
        direction = Direction(direction)
        found: List[Tuple[int, Triplet, str]] = []
        if direction in (Direction.OUT, Direction.BOTH):
            found.extend((0, self._triplets[k], k.tail) for k in self._out.get(entity_id, ()))
        if direction in (Direction.IN, Direction.BOTH):
            found.extend((1, self._triplets[k], k.head) for k in self._in.get(entity_id, ()))
        found.sort(key=lambda item: (self._entities[item[2]].key, item[1].relation.name, item[0]))
        return [(triplet, other) for _, triplet, other in found]

    def triplets_between(self, a: str, b: str) -> List[Triplet]:
        """Triplets joining two entities in either direction, ordered by (relation, direction)."""
        found = [self._triplets[k] for k in self._out.get(a, ()) if k.tail == b]
        found += [self._triplets[k] for k in self._out.get(b, ()) if k.tail == a]
        return sorted(found, key=lambda t: (t.relation.name, t.head != a))

    def undirected(self) -> nx.Graph:
        """Simple undirected view (parallel relations collapse to one edge)."""
        if self._undirected is not None:
            return self._undirected
        view = nx.Graph()
        view.add_nodes_from(self._entities)
        view.add_edges_from((t.head, t.tail) for t in self._triplets.values())
        return view

    def memo(self, key: Hashable, build: Callable[[], object]) -> object:
        """Build-once cache of derived read-only data for frozen graphs."""
        if not self._frozen:
            return build()
        with self._lock:
            if key not in self._memo:
                self._memo[key] = build()
            return self._memo[key]

    # ---------- derived graphs and statistics ----------

    def induced_subgraph(self, entity_ids: Iterable[str]) -> "KnowledgeGraph":
        wanted = set(entity_ids)
        for entity_id in wanted:
            if entity_id not in self._entities:
                raise UnknownEntity(entity_id)
        sub = KnowledgeGraph()
        for entity in self._entities.values():
            if entity.id in wanted:
                sub._store_entity(entity)
        for triplet in self._triplets.values():
            if triplet.head in wanted and triplet.tail in wanted:
                sub._store_triplet(triplet)
        if self._frozen:
            sub.freeze()
        return sub

    def compute_stats(self) -> GraphStats:
        if not self._entities:
            return GraphStats()

        layer_counts = Counter(e.layer.code for e in self._entities.values())
        relation_counts = Counter(t.relation.name for t in self._triplets.values())
        counts = np.array([t.paper_count for t in self._triplets.values()], dtype=np.int64)

        cross = 0
        per_layer_papers: Dict[str, List[int]] = defaultdict(list)
        per_relation_papers: Dict[str, List[int]] = defaultdict(list)
        for triplet in self._triplets.values():
            head_layer = self._entities[triplet.head].layer.code
            tail_layer = self._entities[triplet.tail].layer.code
            if head_layer != tail_layer:
                cross += 1
            for layer in {head_layer, tail_layer}:
                per_layer_papers[layer].append(triplet.paper_count)
            per_relation_papers[triplet.relation.name].append(triplet.paper_count)

        edge_count = len(self._triplets)
        if edge_count:
            q1, median, q3 = (int(v) for v in np.percentile(counts, [25, 50, 75], method="lower"))
            mean = float(counts.mean())
        else:
            q1 = median = q3 = 0
            mean = 0.0

        return GraphStats(
            node_count=len(self._entities),
            edge_count=edge_count,
            per_layer_node_counts=dict(sorted(layer_counts.items())),
            per_relation_edge_counts=dict(sorted(relation_counts.items())),
            cross_layer_count=cross,
            cross_layer_fraction=cross / edge_count if edge_count else 0.0,
            median_paper_count=median,
            paper_count_quartiles=(q1, q3),
            mean_paper_count=mean,
            per_layer_mean_paper_count={
                layer: float(np.mean(per_layer_papers[layer])) if per_layer_papers[layer] else 0.0
                for layer in sorted(layer_counts)
            },
            per_relation_mean_paper_count={
                name: float(np.mean(values)) for name, values in sorted(per_relation_papers.items())
            },
            flagged_count=sum(1 for t in self._triplets.values() if t.low_evidence),
            empty=edge_count == 0,
        )
