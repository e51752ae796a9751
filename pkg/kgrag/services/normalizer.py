# kgrag/services/normalizer.py
"""Mention normalization (exact → alias → fuzzy → semantic) and query entity linking."""
import enum
import re
from typing import Dict, List, Mapping, Optional, Tuple

import structlog
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, model_validator
from rapidfuzz import process
from rapidfuzz.distance import Levenshtein

from kgrag.core.config import NormalizerConfig
from kgrag.core.errors import EmptyMention, MalformedJson, ZeroVector
from kgrag.db.graph import KnowledgeGraph
from kgrag.db.models import Layer
from kgrag.services.embedding import Embedder, embed_text, node_embeddings

logger = structlog.get_logger(__name__)

MAX_NGRAM = 6
_TOKEN = re.compile(r"\w+(?:[-./:'+]\w+)*")


class MatchStage(str, enum.Enum):
    EXACT = "exact"
    ALIAS = "alias"
    FUZZY = "fuzzy"
    SEMANTIC = "semantic"
    UNRESOLVED = "unresolved"


class NormalizationResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    mention: str
    resolved: Optional[str] = None
    stage: MatchStage = MatchStage.UNRESOLVED
    score: float = Field(0.0, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _consistent(self) -> "NormalizationResult":
        if (self.stage is MatchStage.UNRESOLVED) != (self.resolved is None):
            raise ValueError("resolved must be absent exactly when stage is unresolved")
        if self.stage in (MatchStage.EXACT, MatchStage.ALIAS) and self.score != 1.0:
            raise ValueError("exact and alias matches score 1.0")
        return self


class EntityLink(BaseModel):
    model_config = ConfigDict(frozen=True)

    entity_id: str
    layer: Layer
    start: int
    end: int
    text: str
    score: float
    stage: MatchStage


def fuzzy_score(a: str, b: str) -> float:
    """1 − levenshtein(a, b) / max(|a|, |b|) on case-folded strings."""
    if not a or not b:
        raise EmptyMention("fuzzy_score needs two non-empty strings")
    return Levenshtein.normalized_similarity(a.casefold(), b.casefold())


def load_alias_table(stream) -> Dict[str, str]:
    """Read a ``{alias: canonical_name}`` JSON object."""
    data = stream.read() if hasattr(stream, "read") else stream
    try:
        return TypeAdapter(Dict[str, str]).validate_json(data)
    except ValidationError as exc:
        raise MalformedJson(exc.errors()[0]["msg"], getattr(stream, "name", "<alias table>")) from exc


def _shadowed(candidate: Tuple[int, int, NormalizationResult], candidates) -> bool:
    n, i, result = candidate
    if result.stage is not MatchStage.FUZZY:
        return False
    return any(
        other.resolved == result.resolved and other.score > result.score and i <= j and j + m <= i + n and m < n
        for m, j, other in candidates
    )


class EntityNormalizer:
    def __init__(
        self,
        graph: KnowledgeGraph,
        embedder: Optional[Embedder] = None,
        config: Optional[NormalizerConfig] = None,
        extra_aliases: Optional[Mapping[str, str]] = None,
    ):
        self.graph = graph
        self.embedder = embedder
        self.config = config or NormalizerConfig()
        self._extra: Dict[str, str] = {}
        for alias, canonical in (extra_aliases or {}).items():
            target = graph.lookup_canonical(canonical)
            if target is None:
                logger.warning("alias_target_unknown", alias=alias, canonical=canonical)
                continue
            self._extra[alias.strip().casefold()] = target

        vocabulary = list(graph.memo(("vocabulary",), graph.vocabulary))
        vocabulary += sorted(self._extra.items())
        self._forms = [form for form, _ in vocabulary]
        self._form_ids = [entity_id for _, entity_id in vocabulary]

    def normalize(self, mention: str, use_semantic: bool = True) -> NormalizationResult:
        text = mention.strip() if isinstance(mention, str) else ""
        if not text:
            raise EmptyMention("mention is empty")

        entity_id = self.graph.lookup_canonical(text)
        if entity_id is not None:
            return NormalizationResult(mention=mention, resolved=entity_id, stage=MatchStage.EXACT, score=1.0)

        entity_id = self.graph.lookup_alias(text) or self._extra.get(text.casefold())
        if entity_id is not None:
            return NormalizationResult(mention=mention, resolved=entity_id, stage=MatchStage.ALIAS, score=1.0)

        best = self._fuzzy(text)
        if best is not None:
            return NormalizationResult(mention=mention, resolved=best[0], stage=MatchStage.FUZZY, score=best[1])

        if use_semantic and self.embedder is not None:
            best = self._semantic(text)
            if best is not None:
                return NormalizationResult(mention=mention, resolved=best[0], stage=MatchStage.SEMANTIC, score=best[1])

        return NormalizationResult(mention=mention)

    def _fuzzy(self, text: str) -> Optional[Tuple[str, float]]:
        matches = process.extract(
            text,
            self._forms,
            scorer=Levenshtein.normalized_similarity,
            processor=str.casefold,
            limit=None,
            score_cutoff=self.config.fuzzy_threshold,
        )
        if not matches:
            return None
        _, score, index = min(
            matches, key=lambda m: (-m[1], self.graph.entity(self._form_ids[m[2]]).key, m[2])
        )
        return self._form_ids[index], float(score)

    def _semantic(self, text: str) -> Optional[Tuple[str, float]]:
        try:
            query = embed_text(text, self.embedder)
        except ZeroVector:
            return None
        top = node_embeddings(self.graph, self.embedder).top_k(query, 1)
        if not top:
            return None
        entity_id, score = top[0]
        score = min(1.0, score)
        if score < self.config.semantic_threshold:
            return None
        return entity_id, score

    def link(self, text: str) -> List[EntityLink]:
        """Dictionary linking over token n-grams (n ≤ 6).

        Overlaps go to the longer span (then the earlier one); output is
        non-overlapping and ordered by start offset. A fuzzy span is dropped
        when it contains a better-scoring span of the same entity, so the
        words around a name stay free for trigger matching.
        """
        tokens = list(_TOKEN.finditer(text or ""))
        candidates = []
        for i in range(len(tokens)):
            for n in range(1, min(MAX_NGRAM, len(tokens) - i) + 1):
                phrase = " ".join(m.group() for m in tokens[i:i + n])
                result = self.normalize(phrase, use_semantic=False)
                if result.resolved is not None and result.score >= self.config.link_confidence:
                    candidates.append((n, i, result))
        candidates = [c for c in candidates if not _shadowed(c, candidates)]

        taken = [False] * len(tokens)
        chosen = []
        for n, i, result in sorted(candidates, key=lambda c: (-c[0], c[1])):
            if any(taken[i:i + n]):
                continue
            taken[i:i + n] = [True] * n
            start, end = tokens[i].start(), tokens[i + n - 1].end()
            chosen.append(
                EntityLink(
                    entity_id=result.resolved,
                    layer=self.graph.entity(result.resolved).layer,
                    start=start,
                    end=end,
                    text=text[start:end],
                    score=result.score,
                    stage=result.stage,
                )
            )
        chosen.sort(key=lambda link: link.start)
        return chosen


def normalize_mention(
    mention: str,
    graph: KnowledgeGraph,
    embedder: Optional[Embedder] = None,
    config: Optional[NormalizerConfig] = None,
) -> NormalizationResult:
    return EntityNormalizer(graph, embedder, config).normalize(mention)


def link_entities(text: str, graph: KnowledgeGraph, config: Optional[NormalizerConfig] = None) -> List[EntityLink]:
    return EntityNormalizer(graph, None, config).link(text)
