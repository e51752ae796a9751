# kgrag/cli/schemas.py
import json
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from kgrag.db.graph import KnowledgeGraph
from kgrag.services.extractor import CandidateTriplet
from kgrag.services.metrics import RougeScore, RunSummary
from kgrag.services.retriever import RetrievalResult
from kgrag.services.sweep import SweepPoint


def render(payload: Any) -> str:
    """Canonical stdout JSON: sorted keys, two-space indent, trailing newline."""
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


class NodeView(BaseModel):
    model_config = ConfigDict(extra="ignore")

    id: str
    name: str
    layer: str = ""
    identifier: str = ""


class EdgeView(BaseModel):
    head: str
    relation: str
    tail: str
    paper_count: int
    provenance: str
    low_evidence: bool


def node_views(graph: KnowledgeGraph) -> List[NodeView]:
    return [
        NodeView(id=e.id, name=e.canonical_name, layer=e.layer.code, identifier=e.identifier)
        for e in graph.sorted_entities()
    ]


def edge_views(graph: KnowledgeGraph) -> List[EdgeView]:
    edges = [
        EdgeView(
            head=graph.name_of(t.head),
            relation=t.relation.name,
            tail=graph.name_of(t.tail),
            paper_count=t.paper_count,
            provenance=t.provenance.value,
            low_evidence=t.low_evidence,
        )
        for t in graph.triplets()
    ]
    return sorted(edges, key=lambda e: (e.head.casefold(), e.relation, e.tail.casefold()))


class SubgraphView(BaseModel):
    model_config = ConfigDict(extra="ignore")

    query: str = ""
    mode: str = ""
    seeds: List[str] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)
    nodes: List[NodeView] = Field(default_factory=list)
    edges: List[EdgeView] = Field(default_factory=list)
    paths: List[str] = Field(default_factory=list)

    @classmethod
    def of(cls, query: str, result: RetrievalResult, graph: KnowledgeGraph) -> "SubgraphView":
        context = result.serialized_context
        return cls(
            query=query,
            mode=result.mode.value,
            seeds=[graph.name_of(s) for s in result.seeds],
            warnings=result.warnings,
            nodes=node_views(result.subgraph),
            edges=edge_views(result.subgraph),
            paths=context.split("\n") if context else [],
        )


class CandidateView(BaseModel):
    head: str
    relation: str
    tail: str
    paper_count: int
    provenance: str
    flagged_for_review: bool
    source_sentence: str

    @classmethod
    def of(cls, candidate: CandidateTriplet, graph: KnowledgeGraph, **extra) -> "CandidateView":
        def name(endpoint: str) -> str:
            return graph.name_of(endpoint) if endpoint in graph else endpoint

        return cls(
            head=name(candidate.head),
            relation=candidate.relation.name,
            tail=name(candidate.tail),
            paper_count=candidate.paper_count,
            provenance=candidate.provenance.value,
            flagged_for_review=candidate.flagged_for_review,
            source_sentence=candidate.source_sentence,
            **extra,
        )


class RejectedView(CandidateView):
    reason: str


class ExtractReport(BaseModel):
    sentences: int
    candidates: int
    after_conflicts: int
    inserted: int
    merged: int
    accepted: List[CandidateView]
    rejected: List[RejectedView]
    committed_to: Optional[str] = None


class PromptView(BaseModel):
    id: str
    seeds: List[str]
    warnings: List[str]
    messages: List[Dict[str, str]]


class SweepReport(BaseModel):
    baseline: Dict[str, Any]
    points: List[SweepPoint]


class MetricReport(BaseModel):
    """One metric value plus the counts behind it."""
    model_config = ConfigDict(extra="allow")

    metric: str
    value: float


class RougePairView(BaseModel):
    index: int
    score: RougeScore


class RougeReport(MetricReport):
    pairs: List[RougePairView] = Field(default_factory=list)
    f1_summary: Optional[RunSummary] = None
