# kgrag/services/embedding.py
import hashlib
from typing import List, Optional, Protocol, Sequence, Tuple, runtime_checkable

import numpy as np
import structlog

from kgrag.core.config import RunConfig
from kgrag.core.errors import DimensionMismatch, ZeroVector
from kgrag.db.graph import KnowledgeGraph
from kgrag.db.models import Entity

logger = structlog.get_logger(__name__)


@runtime_checkable
class Embedder(Protocol):
    """Text → fixed-dimension real vector. ``dimension`` is declared once."""
    name: str
    dimension: int

    def encode(self, text: str) -> np.ndarray: ...


class TrigramEmbedder:
    """Character-trigram feature hashing; deterministic, no model download."""

    def __init__(self, dimension: int = 256):
        self.dimension = dimension
        self.name = f"trigram-{dimension}"

    @staticmethod
    def trigrams(text: str) -> List[str]:
        padded = f" {' '.join(text.casefold().split())} "
        return [padded[i:i + 3] for i in range(len(padded) - 2)]

    def encode(self, text: str) -> np.ndarray:
        vector = np.zeros(self.dimension, dtype=np.float64)
        for gram in self.trigrams(text):
            digest = hashlib.md5(gram.encode("utf-8")).digest()
            vector[int.from_bytes(digest[:8], "big") % self.dimension] += 1.0
        return vector


class SentenceTransformerEmbedder:
    def __init__(self, model_name: str = "all-MiniLM-L6-v2"):
        from sentence_transformers import SentenceTransformer

        logger.info("loading_sentence_transformer", model=model_name)
        self.model = SentenceTransformer(model_name)
        self.dimension = int(self.model.get_sentence_embedding_dimension())
        self.name = f"st-{model_name}"

    def encode(self, text: str) -> np.ndarray:
        return np.asarray(self.model.encode(text, convert_to_numpy=True), dtype=np.float64)


def build_embedder(config: RunConfig) -> Embedder:
    if config.embedder == "sentence-transformers":
        return SentenceTransformerEmbedder(config.embedding_model)
    return TrigramEmbedder(config.embedding_dimension)


def unit_normalize(vector: np.ndarray, dimension: Optional[int] = None) -> np.ndarray:
    vector = np.asarray(vector, dtype=np.float64).reshape(-1)
    if dimension is not None and vector.shape[0] != dimension:
        raise DimensionMismatch(f"expected {dimension}-dimensional vector, got {vector.shape[0]}")
    norm = float(np.linalg.norm(vector))
    if norm == 0.0 or not np.isfinite(norm):
        raise ZeroVector("cannot normalize an all-zero feature vector")
    return vector / norm


def embed_text(text: str, embedder: Embedder) -> np.ndarray:
    try:
        return unit_normalize(embedder.encode(text), embedder.dimension)
    except ZeroVector:
        raise ZeroVector(f"text {text!r} produced an all-zero feature vector") from None


def embed_node(entity: Entity, embedder: Embedder) -> np.ndarray:
    """Unit vector of ``canonical_name + " " + definition``."""
    return embed_text(f"{entity.canonical_name} {entity.definition}".strip(), embedder)


class EmbeddingTable:
    """Row-per-entity unit vectors, ordered by case-folded canonical name."""

    def __init__(self, ids: Sequence[str], names: Sequence[str], matrix: np.ndarray):
        self.ids = tuple(ids)
        self.names = tuple(names)
        self.matrix = matrix
        self.matrix.setflags(write=False)

    @classmethod
    def build(cls, graph: KnowledgeGraph, embedder: Embedder) -> "EmbeddingTable":
        entities = graph.sorted_entities()
        matrix = np.zeros((len(entities), embedder.dimension), dtype=np.float64)
        for row, entity in enumerate(entities):
            matrix[row] = embed_node(entity, embedder)
        logger.info("node_embeddings_built", embedder=embedder.name, nodes=len(entities))
        return cls([e.id for e in entities], [e.key for e in entities], matrix)

    def scores(self, query: np.ndarray) -> np.ndarray:
        return self.matrix @ query

    def top_k(self, query: np.ndarray, k: int) -> List[Tuple[str, float]]:
        """Linear scan; ties broken by case-folded name."""
        scores = self.scores(query)
        order = sorted(range(len(self.ids)), key=lambda i: (-scores[i], self.names[i]))
        return [(self.ids[i], float(scores[i])) for i in order[:k]]


def node_embeddings(graph: KnowledgeGraph, embedder: Embedder) -> EmbeddingTable:
    """Per-graph table, built once per embedder for frozen graphs and shared read-only."""
    return graph.memo(
        ("node_embeddings", embedder.name, embedder.dimension),
        lambda: EmbeddingTable.build(graph, embedder),
    )
