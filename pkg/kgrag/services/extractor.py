# kgrag/services/extractor.py
"""Rule-based relation extraction.

A template fires for an ordered pair of linked entities when the pair's
layers match (subject first in the text, object second) and one of its
trigger phrases occurs between the two spans.
"""
import functools
import re
from collections import defaultdict
from typing import Annotated, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import structlog
from pydantic import BaseModel, ConfigDict, Field, StrictInt, TypeAdapter, ValidationError, field_validator

from kgrag.core.config import NormalizerConfig
from kgrag.core.errors import GraphFrozen, NonpositiveCount, SelfLoop, UnknownEntity
from kgrag.db.graph import KnowledgeGraph
from kgrag.db.ingest import Stream, ingest_error_from, read_bytes
from kgrag.db.models import DIAGNOSTIC, GENE, SYNDROME, TREATMENT, Layer, Provenance, RelationLabel, TripletKey
from kgrag.services.normalizer import EntityLink, EntityNormalizer

logger = structlog.get_logger(__name__)

_ABBREVIATIONS = ("e.g.", "i.e.", "et al.", "vs.", "dr.", "fig.", "approx.", "cf.", "no.", "ref.")
_SENTENCE_END = re.compile(r"[.!?]+(?=\s|$)")
_NEGATIONS = ("not", "never", "cannot", "no longer")
_NEGATED = re.compile(
    r"(?<!\w)(?:" + "|".join(r"\s+".join(map(re.escape, n.split())) for n in _NEGATIONS) + r")\s*$",
    re.IGNORECASE,
)


def same_layer(a: Layer, b: Layer) -> bool:
    return a.label == b.label and (a.tag or "").casefold() == (b.tag or "").casefold()


@functools.lru_cache(maxsize=256)
def _trigger_pattern(phrases: FrozenSet[str]) -> "re.Pattern[str]":
    alternatives = sorted(phrases, key=lambda p: (-len(p), p))
    body = "|".join(r"\s+".join(map(re.escape, p.split())) for p in alternatives)
    return re.compile(rf"(?<!\w)(?:{body})(?!\w)", re.IGNORECASE)


class TriggerTemplate(BaseModel):
    model_config = ConfigDict(frozen=True)

    subject_layer: Layer
    trigger_phrases: FrozenSet[str] = Field(..., min_length=1)
    object_layer: Layer
    relation: RelationLabel

    @field_validator("subject_layer", "object_layer", mode="before")
    @classmethod
    def _parse_layer(cls, value):
        return Layer.parse(value) if isinstance(value, str) else value

    @field_validator("trigger_phrases", mode="before")
    @classmethod
    def _clean_phrases(cls, value):
        phrases = [p for p in value] if not isinstance(value, str) else [value]
        if any(not isinstance(p, str) or not p.strip() for p in phrases):
            raise ValueError("trigger phrases must be non-empty strings")
        return frozenset(" ".join(p.casefold().split()) for p in phrases)

    @field_validator("relation", mode="before")
    @classmethod
    def _relation(cls, value):
        return RelationLabel.of(value) if isinstance(value, str) else value

    def applies_to(self, subject: Layer, obj: Layer) -> bool:
        return same_layer(self.subject_layer, subject) and same_layer(self.object_layer, obj)

    def triggered_by(self, text: str) -> bool:
        """A trigger directly preceded by a negation does not count."""
        return any(
            not _NEGATED.search(text, 0, match.start())
            for match in _trigger_pattern(self.trigger_phrases).finditer(text)
        )


def _template(subject: Layer, phrases: Sequence[str], obj: Layer, relation: str) -> TriggerTemplate:
    return TriggerTemplate(subject_layer=subject, trigger_phrases=phrases, object_layer=obj, relation=relation)


DEFAULT_TEMPLATES: Tuple[TriggerTemplate, ...] = (
    _template(
        TREATMENT,
        ["recommended for", "recommended as", "first-line", "effective in", "effective for", "indicated for"],
        SYNDROME,
        "treats",
    ),
    _template(
        TREATMENT,
        ["avoid", "avoided", "contraindicated", "not recommended", "should not be used"],
        GENE,
        "contraindicated_with",
    ),
    _template(GENE, ["associated with", "linked to", "implicated in", "underlies"], SYNDROME, "associated_with"),
    _template(
        DIAGNOSTIC,
        ["characteristic of", "consistent with", "seen in", "typical of", "hallmark of"],
        SYNDROME,
        "characteristic_of",
    ),
    _template(GENE, ["encodes", "codes for", "produces", "results in"], Layer.parse("Protein"), "encodes"),
    _template(
        GENE,
        ["expressed in", "detected in", "localised to", "localized to"],
        Layer.parse("Anatomy"),
        "expressed_in",
    ),
)


class CandidateTriplet(BaseModel):
    """A proposed triplet; endpoints are entity ids, or raw names when unresolved."""
    model_config = ConfigDict(frozen=True)

    head: str
    relation: RelationLabel
    tail: str
    paper_count: int = Field(1, ge=1)
    source_sentence: str = ""
    provenance: Provenance = Provenance.RULE_BASED
    flagged_for_review: bool = False

    @field_validator("relation", mode="before")
    @classmethod
    def _relation(cls, value):
        return RelationLabel.of(value) if isinstance(value, str) else value

    @property
    def key(self) -> TripletKey:
        return TripletKey(self.head, self.relation.name, self.tail)


class Rejection(BaseModel):
    candidate: CandidateTriplet
    reason: str


class CommitReport(BaseModel):
    inserted: int = 0
    merged: int = 0
    accepted: List[CandidateTriplet] = Field(default_factory=list)
    rejected: List[Rejection] = Field(default_factory=list)


def split_sentences(text: str) -> List[str]:
    """Split on ``. ! ?`` followed by whitespace or end of text, skipping common abbreviations."""
    sentences, start = [], 0
    for match in _SENTENCE_END.finditer(text):
        head = text[start:match.end()].casefold()
        if any(
            head.endswith(abbr) and (len(head) == len(abbr) or not head[-len(abbr) - 1].isalnum())
            for abbr in _ABBREVIATIONS
        ):
            continue
        sentence = text[start:match.end()].strip()
        if sentence:
            sentences.append(sentence)
        start = match.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def match_templates(
    sentence: str,
    entity_links: Iterable[EntityLink],
    templates: Sequence[TriggerTemplate] = DEFAULT_TEMPLATES,
) -> List[CandidateTriplet]:
    links = sorted(entity_links, key=lambda link: (link.start, link.end))
    candidates: List[CandidateTriplet] = []
    for i, first in enumerate(links):
        for second in links[i + 1:]:
            if second.start < first.end:
                continue
            between = sentence[first.end:second.start]
            relations = sorted(
                {
                    t.relation.name
                    for t in templates
                    if t.applies_to(first.layer, second.layer) and t.triggered_by(between)
                }
            )
            candidates.extend(
                CandidateTriplet(
                    head=first.entity_id,
                    relation=relation,
                    tail=second.entity_id,
                    paper_count=1,
                    source_sentence=sentence,
                )
                for relation in relations
            )
    return candidates


def extract_candidates(
    text: str,
    graph: KnowledgeGraph,
    templates: Sequence[TriggerTemplate] = DEFAULT_TEMPLATES,
    config: Optional[NormalizerConfig] = None,
    normalizer: Optional[EntityNormalizer] = None,
) -> List[CandidateTriplet]:
    """Sentence-split ``text``, link entities per sentence and apply the templates."""
    normalizer = normalizer or EntityNormalizer(graph, config=config)
    candidates: List[CandidateTriplet] = []
    for sentence in split_sentences(text):
        candidates.extend(match_templates(sentence, normalizer.link(sentence), templates))
    logger.info("candidates_extracted", candidates=len(candidates))
    return candidates


def resolve_conflicts(candidates: Iterable[CandidateTriplet]) -> List[CandidateTriplet]:
    """Merge identical triplets, then keep the highest-count relation per (head, tail).

    Ties are all retained and marked ``flagged_for_review``.
    """
    merged: Dict[TripletKey, CandidateTriplet] = {}
    for candidate in candidates:
        existing = merged.get(candidate.key)
        if existing is None:
            merged[candidate.key] = candidate
            continue
        provenance = Provenance.MANUAL if candidate.provenance is Provenance.MANUAL else existing.provenance
        merged[candidate.key] = existing.model_copy(
            update={"paper_count": existing.paper_count + candidate.paper_count, "provenance": provenance}
        )

    groups: Dict[Tuple[str, str], List[CandidateTriplet]] = defaultdict(list)
    for candidate in merged.values():
        groups[(candidate.head, candidate.tail)].append(candidate)

    resolved: List[CandidateTriplet] = []
    for group in groups.values():
        best = max(c.paper_count for c in group)
        winners = [c for c in group if c.paper_count == best]
        tie = len(winners) > 1
        if tie:
            logger.info(
                "conflict_tie",
                head=group[0].head,
                tail=group[0].tail,
                relations=[c.relation.name for c in winners],
            )
        resolved.extend(c.model_copy(update={"flagged_for_review": tie}) for c in winners)
    return resolved


def commit_candidates(graph: KnowledgeGraph, candidates: Iterable[CandidateTriplet]) -> CommitReport:
    if graph.is_frozen:
        raise GraphFrozen("commit needs a graph in build phase; use thawed_copy()")
    report = CommitReport()
    for candidate in candidates:
        existed = graph.has_triplet(candidate.key)
        try:
            graph.add_triplet(
                candidate.head, candidate.relation, candidate.tail, candidate.paper_count, candidate.provenance
            )
        except (UnknownEntity, SelfLoop, NonpositiveCount) as exc:
            report.rejected.append(Rejection(candidate=candidate, reason=str(exc)))
            continue
        report.accepted.append(candidate)
        if existed:
            report.merged += 1
        else:
            report.inserted += 1
    logger.info("candidates_committed", inserted=report.inserted, merged=report.merged, rejected=len(report.rejected))
    return report


_TEMPLATE_LIST = TypeAdapter(List[TriggerTemplate])


def load_templates(stream: Stream, source: str = "<templates>") -> List[TriggerTemplate]:
    """Read a JSON array of ``{subject_layer, trigger_phrases, object_layer, relation}``."""
    try:
        return _TEMPLATE_LIST.validate_json(read_bytes(stream))
    except ValidationError as exc:
        raise ingest_error_from(exc, source) from exc


class CandidateRecord(BaseModel):
    model_config = ConfigDict(extra="ignore", str_strip_whitespace=True)

    head: Annotated[str, Field(min_length=1)]
    relation: Annotated[str, Field(min_length=1)]
    tail: Annotated[str, Field(min_length=1)]
    paper_count: Annotated[StrictInt, Field(gt=0)] = 1
    source_sentence: str = ""
    provenance: Provenance = Provenance.EXTERNAL_EXTRACTOR


_CANDIDATE_LIST = TypeAdapter(List[CandidateRecord])


def parse_candidates(stream: Stream, graph: KnowledgeGraph, source: str = "<candidates>") -> List[CandidateTriplet]:
    """Read externally produced candidates; endpoints that do not resolve stay as given."""
    try:
        records = _CANDIDATE_LIST.validate_json(read_bytes(stream))
    except ValidationError as exc:
        raise ingest_error_from(exc, source) from exc
    return [
        CandidateTriplet(
            head=graph.resolve(record.head) or record.head,
            relation=record.relation,
            tail=graph.resolve(record.tail) or record.tail,
            paper_count=record.paper_count,
            source_sentence=record.source_sentence,
            provenance=record.provenance,
        )
        for record in records
    ]
