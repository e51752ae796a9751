# kgrag/services/sweep.py
"""Sensitivity sweeps: vary one retrieval setting at a time around a baseline and
record subgraph size, path count, evidence coverage and answer recall per value."""
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, ValidationError

from kgrag.core.config import NormalizerConfig, RetrievalConfig
from kgrag.core.errors import ConfigError, EmptySet, LengthMismatch
from kgrag.db.graph import KnowledgeGraph
from kgrag.services.embedding import Embedder
from kgrag.services.metrics import McqItem, kg_evidence_coverage
from kgrag.services.retriever import GraphRetriever, RetrievalResult

logger = structlog.get_logger(__name__)

SweepValue = Union[int, float, str]

DEFAULT_GRID: Dict[str, Tuple[SweepValue, ...]] = {
    "max_nodes": (10, 20, 30, 40),
    "max_depth": (2, 3, 4, 5),
    "alpha": (0.10, 0.15, 0.20),
    "top_k": (5, 10, 15),
    "link_confidence": (0.7, 0.8, 0.9),
    "mode": ("ppr_pcst", "semantic", "hybrid"),
}


class SweepPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    parameter: str
    value: SweepValue
    queries: int
    mean_nodes: float
    mean_edges: float
    mean_paths: float
    kgec: float
    answer_hit_rate: float
    fallbacks: int


def _configs(
    parameter: str, value: SweepValue, retrieval: RetrievalConfig, normalizer: NormalizerConfig
) -> Tuple[RetrievalConfig, NormalizerConfig]:
    try:
        if parameter in NormalizerConfig.model_fields:
            return retrieval, NormalizerConfig.model_validate({**normalizer.model_dump(), parameter: value})
        if parameter in RetrievalConfig.model_fields:
            return RetrievalConfig.model_validate({**retrieval.model_dump(), parameter: value}), normalizer
    except ValidationError as exc:
        raise ConfigError(f"invalid sweep value {parameter}={value!r}: {exc.errors()[0]['msg']}") from exc
    raise ConfigError(f"unknown sweep parameter {parameter!r}")


def _coverage(graph: KnowledgeGraph, result: RetrievalResult, answer: str) -> float:
    return kg_evidence_coverage(result.subgraph, answer, graph) if len(result.subgraph) else 0.0


def _answer_hit(graph: KnowledgeGraph, result: RetrievalResult, item: McqItem) -> bool:
    entity_id = graph.resolve(item.options[item.gold])
    return entity_id is not None and entity_id in result.subgraph


def evaluate_setting(
    graph: KnowledgeGraph,
    items: Sequence[McqItem],
    answers: Sequence[str],
    retrieval: RetrievalConfig,
    normalizer: NormalizerConfig,
    embedder: Optional[Embedder] = None,
) -> Dict[str, float]:
    """Retrieve for every item question under one setting and average the subgraph statistics."""
    retriever = GraphRetriever(graph, retrieval, embedder, normalizer)
    results = [retriever.retrieve(item.question) for item in items]
    return {
        "mean_nodes": float(np.mean([len(r.subgraph) for r in results])),
        "mean_edges": float(np.mean([r.subgraph.edge_count for r in results])),
        "mean_paths": float(np.mean([len(r.paths) for r in results])),
        "kgec": float(np.mean([_coverage(graph, r, a) for r, a in zip(results, answers)])),
        "answer_hit_rate": float(np.mean([_answer_hit(graph, r, item) for r, item in zip(results, items)])),
        "fallbacks": sum(r.mode is not retrieval.mode for r in results),
    }


def run_sweep(
    graph: KnowledgeGraph,
    items: Sequence[McqItem],
    answers: Optional[Sequence[str]] = None,
    grid: Optional[Dict[str, Sequence[SweepValue]]] = None,
    retrieval: Optional[RetrievalConfig] = None,
    normalizer: Optional[NormalizerConfig] = None,
    embedder: Optional[Embedder] = None,
) -> List[SweepPoint]:
    """One point per (parameter, value), in grid order; the other settings stay at the baseline.

    Coverage is measured against ``answers`` (generated outputs) or, when absent,
    against each item's gold option text. An answer hit means the gold option
    resolves to an entity inside the subgraph.
    """
    if not items:
        raise EmptySet("sweep needs at least one item")
    if answers is None:
        answers = [item.options[item.gold] for item in items]
    if len(answers) != len(items):
        raise LengthMismatch(f"{len(items)} items but {len(answers)} answers")
    grid = DEFAULT_GRID if grid is None else grid
    retrieval = retrieval or RetrievalConfig()
    normalizer = normalizer or NormalizerConfig()

    points: List[SweepPoint] = []
    for parameter, values in grid.items():
        for value in values:
            r_config, n_config = _configs(parameter, value, retrieval, normalizer)
            stats = evaluate_setting(graph, items, answers, r_config, n_config, embedder)
            point = SweepPoint(parameter=parameter, value=value, queries=len(items), **stats)
            logger.info("sweep_point", parameter=parameter, value=value, kgec=point.kgec, nodes=point.mean_nodes)
            points.append(point)
    return points
