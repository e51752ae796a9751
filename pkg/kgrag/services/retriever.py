# kgrag/services/retriever.py
"""Query → seeds → subgraph → reasoning paths → serialized context."""
from typing import Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx
import structlog
from pydantic import BaseModel, ConfigDict, Field

from kgrag.core.config import NormalizerConfig, RetrievalConfig, RetrievalMode
from kgrag.core.errors import EmptyGraph, EmptySeedSet
from kgrag.db.graph import KnowledgeGraph
from kgrag.services.embedding import Embedder, TrigramEmbedder, embed_text, node_embeddings
from kgrag.services.normalizer import EntityLink, EntityNormalizer
from kgrag.services.paths import ReasoningPath, enumerate_paths, serialize_context
from kgrag.services.pcst import PcstResult, depth_filter, pcst_extract
from kgrag.services.ppr import PrizeMap, personalized_pagerank

logger = structlog.get_logger(__name__)


class RetrievalResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    subgraph: KnowledgeGraph
    paths: List[ReasoningPath]
    serialized_context: str
    seeds: List[str]
    links: List[EntityLink] = Field(default_factory=list)
    mode: RetrievalMode
    warnings: List[str] = Field(default_factory=list)
    prizes: Optional[PrizeMap] = None


def semantic_hits(
    graph: KnowledgeGraph, query_text: str, embedder: Embedder, top_k: int
) -> List[Tuple[str, float]]:
    """Top-k entities by cosine to the query; ties by case-folded name."""
    query = embed_text(query_text, embedder)
    return node_embeddings(graph, embedder).top_k(query, top_k)


def semantic_retrieve(
    graph: KnowledgeGraph,
    query_text: str,
    embedder: Embedder,
    config: Optional[RetrievalConfig] = None,
) -> KnowledgeGraph:
    """Induced subgraph over the top-k hits and their depth-1 neighbourhoods."""
    config = config or RetrievalConfig()
    graph.require_frozen()
    if len(graph) == 0:
        raise EmptyGraph("cannot retrieve from an empty graph")
    hits = semantic_hits(graph, query_text, embedder, config.top_k)
    view = graph.undirected()
    nodes: Set[str] = set()
    for entity_id, _ in hits:
        nodes.add(entity_id)
        nodes.update(view[entity_id])
    logger.info("semantic_retrieved", hits=len(hits), nodes=len(nodes))
    return graph.induced_subgraph(nodes)


def ppr_pcst_retrieve(
    graph: KnowledgeGraph,
    seeds: Sequence[str],
    config: Optional[RetrievalConfig] = None,
) -> Tuple[PcstResult, PrizeMap]:
    config = config or RetrievalConfig()
    prizes = personalized_pagerank(graph, seeds, config)
    candidates = depth_filter(graph, seeds, config.max_depth)
    return pcst_extract(graph, prizes, candidates, config), prizes


def _seed_component(graph: KnowledgeGraph, nodes: Set[str], seeds: Iterable[str], prizes: PrizeMap) -> Set[str]:
    """Largest connected component holding a seed; ties go to the higher-prize seed."""
    seeds = [s for s in seeds if s in nodes]
    view = graph.undirected().subgraph(nodes)
    best: Tuple = ()
    chosen: Set[str] = set()
    for component in nx.connected_components(view):
        members = [s for s in seeds if s in component]
        if not members:
            continue
        rank = min((-prizes[s], graph.entity(s).key) for s in members)
        candidate = (-len(component), rank)
        if not best or candidate < best:
            best, chosen = candidate, set(component)
    return chosen


def _hybrid(
    graph: KnowledgeGraph,
    query_text: str,
    embedder: Embedder,
    config: RetrievalConfig,
    seeds: Sequence[str],
) -> Tuple[KnowledgeGraph, PrizeMap]:
    pcst, prizes = ppr_pcst_retrieve(graph, seeds, config)
    semantic = semantic_retrieve(graph, query_text, embedder, config)
    union = set(pcst.nodes) | set(semantic.entity_ids)
    seed_set = set(seeds)

    excess = len(union) - config.max_nodes
    if excess > 0:
        def prize(node: str) -> float:
            return prizes[node] if node in pcst.nodes else 0.0

        droppable = sorted((v for v in union if v not in seed_set), key=lambda v: (prize(v), graph.entity(v).key))
        dropped = droppable[:excess]
        union.difference_update(dropped)
        logger.info("hybrid_pruned", dropped=len(dropped))

    return graph.induced_subgraph(_seed_component(graph, union, seeds, prizes)), prizes


def hybrid_retrieve(
    graph: KnowledgeGraph,
    query_text: str,
    embedder: Embedder,
    config: Optional[RetrievalConfig] = None,
    seeds: Optional[Sequence[str]] = None,
    normalizer_config: Optional[NormalizerConfig] = None,
) -> KnowledgeGraph:
    """Union of the PPR-PCST and semantic subgraphs, pruned to the node budget.

    Over budget, non-seed nodes go first in ascending prize order (nodes only
    the semantic side found count as prize 0); the survivors are cut down to
    the largest seed-holding component.
    """
    config = config or RetrievalConfig()
    if seeds is None:
        seeds = [link.entity_id for link in EntityNormalizer(graph, config=normalizer_config).link(query_text)]
    seeds = list(dict.fromkeys(seeds))
    if not seeds:
        raise EmptySeedSet("hybrid retrieval needs at least one linked seed")
    subgraph, _ = _hybrid(graph, query_text, embedder, config, seeds)
    return subgraph


class GraphRetriever:
    """Bundles a frozen graph with its embedder, normalizer and retrieval settings."""

    def __init__(
        self,
        graph: KnowledgeGraph,
        config: Optional[RetrievalConfig] = None,
        embedder: Optional[Embedder] = None,
        normalizer_config: Optional[NormalizerConfig] = None,
    ):
        graph.require_frozen()
        self.graph = graph
        self.config = config or RetrievalConfig()
        self.embedder = embedder or TrigramEmbedder()
        self.normalizer = EntityNormalizer(graph, config=normalizer_config)

    def retrieve(self, query_text: str) -> RetrievalResult:
        graph, config = self.graph, self.config
        if len(graph) == 0:
            raise EmptyGraph("cannot retrieve from an empty graph")

        links = self.normalizer.link(query_text)
        seeds = list(dict.fromkeys(link.entity_id for link in links))
        mode, warnings = config.mode, []
        if not seeds and mode is not RetrievalMode.SEMANTIC:
            warnings.append("no seed entity linked in the query; fell back to semantic retrieval")
            logger.warning("semantic_fallback", query=query_text, requested_mode=mode.value)
            mode = RetrievalMode.SEMANTIC

        prizes: Optional[PrizeMap] = None
        if mode is RetrievalMode.PPR_PCST:
            pcst, prizes = ppr_pcst_retrieve(graph, seeds, config)
            subgraph = pcst.subgraph
        elif mode is RetrievalMode.HYBRID:
            subgraph, prizes = _hybrid(graph, query_text, self.embedder, config, seeds)
        else:
            subgraph = semantic_retrieve(graph, query_text, self.embedder, config)
        if prizes is not None and not prizes.converged:
            warnings.append(
                f"ppr did not converge within {config.ppr_max_iterations} iterations; prizes are approximate"
            )

        path_seeds = [s for s in seeds if s in subgraph]
        if not path_seeds:
            path_seeds = [entity_id for entity_id, _ in semantic_hits(graph, query_text, self.embedder, config.top_k)]
        paths = enumerate_paths(subgraph, path_seeds, config.max_depth)
        context = serialize_context(paths, subgraph)
        logger.info("retrieved", mode=mode.value, seeds=len(seeds), nodes=len(subgraph), paths=len(paths))
        return RetrievalResult(
            subgraph=subgraph,
            paths=paths,
            serialized_context=context,
            seeds=seeds,
            links=links,
            mode=mode,
            warnings=warnings,
            prizes=prizes,
        )


def retrieve(
    graph: KnowledgeGraph,
    query_text: str,
    config: Optional[RetrievalConfig] = None,
    embedder: Optional[Embedder] = None,
    normalizer_config: Optional[NormalizerConfig] = None,
) -> RetrievalResult:
    return GraphRetriever(graph, config, embedder, normalizer_config).retrieve(query_text)
