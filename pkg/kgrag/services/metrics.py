# kgrag/services/metrics.py
import re
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import structlog
from pydantic import AliasChoices, BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, model_validator

from kgrag.core.errors import AllCasesInapplicable, EmptySet, EmptySubgraph, LengthMismatch
from kgrag.db.graph import KnowledgeGraph
from kgrag.db.ingest import Stream, ingest_error_from, read_bytes

logger = structlog.get_logger(__name__)

_PUNCTUATION = re.compile(r"[^\w\s]")


def _fold(names: Iterable[str]) -> FrozenSet[str]:
    return frozenset(" ".join(n.casefold().split()) for n in names)


# ---------- multiple choice ----------

class McqItem(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    question: str = ""
    options: Dict[str, str]
    gold: str = Field(..., validation_alias=AliasChoices("gold", "gold_label"))

    @model_validator(mode="after")
    def _check_options(self) -> "McqItem":
        if len(self.options) < 2:
            raise ValueError("an item needs at least two options")
        if self.gold not in self.options:
            raise ValueError(f"gold label {self.gold!r} is not among the options")
        return self


def extract_choice(response_text: str, options: Mapping[str, str]) -> Optional[str]:
    """First standalone option label in the response, else the first option quoted verbatim."""
    labels = sorted(options, key=lambda label: (-len(label), label))
    if labels:
        pattern = re.compile(r"(?<!\w)(" + "|".join(map(re.escape, labels)) + r")(?!\w)")
        match = pattern.search(response_text or "")
        if match:
            return match.group(1)
    folded = (response_text or "").casefold()
    for label, text in options.items():
        if text.strip() and text.strip().casefold() in folded:
            return label
    return None


def top1_accuracy(items: Sequence[McqItem], responses: Sequence[str]) -> float:
    if len(items) != len(responses):
        raise LengthMismatch(f"{len(items)} items but {len(responses)} responses")
    if not items:
        raise EmptySet("top-1 accuracy over zero items")
    correct = sum(extract_choice(response, item.options) == item.gold for item, response in zip(items, responses))
    return correct / len(items)


# ---------- ROUGE-L ----------

class RougeScore(BaseModel):
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0


def tokenize(text: str) -> List[str]:
    """Case-fold, strip punctuation, split on whitespace."""
    return _PUNCTUATION.sub("", text.casefold()).split()


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = [0] * (len(b) + 1)
    for token in a:
        current = [0]
        for j, other in enumerate(b, start=1):
            current.append(previous[j - 1] + 1 if token == other else max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l(candidate: str, reference: str) -> RougeScore:
    cand, ref = tokenize(candidate), tokenize(reference)
    if not cand or not ref:
        return RougeScore()
    common = lcs_length(cand, ref)
    if common == 0:
        return RougeScore()
    precision, recall = common / len(cand), common / len(ref)
    return RougeScore(precision=precision, recall=recall, f1=2 * precision * recall / (precision + recall))


# ---------- grounding ----------

def mentions(text: str, surface_form: str) -> bool:
    return re.search(rf"(?<!\w){re.escape(surface_form)}(?!\w)", text, re.IGNORECASE) is not None


def kg_evidence_coverage(subgraph: KnowledgeGraph, output_text: str, graph: Optional[KnowledgeGraph] = None) -> float:
    """Share of subgraph entities named (canonically or by alias) in the output."""
    if len(subgraph) == 0:
        raise EmptySubgraph("coverage over a subgraph without entities")
    source = graph if graph is not None else subgraph
    hits = 0
    for entity_id in subgraph.entity_ids:
        entity = source.entity(entity_id) if entity_id in source else subgraph.entity(entity_id)
        if any(mentions(output_text, form) for form in entity.surface_forms()):
            hits += 1
    return hits / len(subgraph)


# ---------- guideline rules ----------

class Rule(BaseModel):
    model_config = ConfigDict(frozen=True)

    context: FrozenSet[str] = Field(
        default_factory=frozenset, validation_alias=AliasChoices("context", "context_predicate")
    )
    recommended: FrozenSet[str] = Field(default_factory=frozenset)
    contraindicated: FrozenSet[str] = Field(default_factory=frozenset)

    @model_validator(mode="after")
    def _disjoint(self) -> "Rule":
        overlap = _fold(self.recommended) & _fold(self.contraindicated)
        if overlap:
            raise ValueError(f"names both recommended and contraindicated: {sorted(overlap)}")
        return self

    def applies_to(self, context: Iterable[str]) -> bool:
        return _fold(self.context) <= _fold(context)


class SafetyCase(BaseModel):
    model_config = ConfigDict(frozen=True)

    context: FrozenSet[str] = Field(default_factory=frozenset)
    recommended: FrozenSet[str] = Field(default_factory=frozenset)
    rules: List[Rule] = Field(default_factory=list)

    def applicable_rules(self) -> List[Rule]:
        return [rule for rule in self.rules if rule.applies_to(self.context)]

    def is_safe(self) -> bool:
        recommended = _fold(self.recommended)
        return not any(recommended & _fold(rule.contraindicated) for rule in self.applicable_rules())

    def concords(self) -> Optional[bool]:
        """None when no rule applies."""
        applicable = self.applicable_rules()
        if not applicable:
            return None
        recommended = _fold(self.recommended)
        return any(recommended <= _fold(rule.recommended) for rule in applicable)


class ConcordanceResult(BaseModel):
    score: float
    concordant: int
    applicable: int
    excluded: int


def drug_safety_score(cases: Sequence[SafetyCase]) -> float:
    if not cases:
        raise EmptySet("drug safety over zero cases")
    return sum(case.is_safe() for case in cases) / len(cases)


def guideline_concordance(cases: Sequence[SafetyCase]) -> ConcordanceResult:
    """Per-case concordance averaged over cases with an applicable rule."""
    if not cases:
        raise EmptySet("guideline concordance over zero cases")
    verdicts = [case.concords() for case in cases]
    applicable = [v for v in verdicts if v is not None]
    excluded = len(verdicts) - len(applicable)
    if not applicable:
        raise AllCasesInapplicable(f"no rule applies to any of the {len(cases)} cases")
    if excluded:
        logger.info("concordance_cases_excluded", excluded=excluded, applicable=len(applicable))
    concordant = sum(applicable)
    return ConcordanceResult(
        score=concordant / len(applicable),
        concordant=concordant,
        applicable=len(applicable),
        excluded=excluded,
    )


# ---------- run aggregation ----------

class RunSummary(BaseModel):
    mean: float
    std: float
    runs: int


def aggregate_runs(values: Sequence[float]) -> RunSummary:
    """Mean and sample standard deviation over repeated runs."""
    if len(values) == 0:
        raise EmptySet("no runs to aggregate")
    data = np.asarray(values, dtype=np.float64)
    std = float(data.std(ddof=1)) if len(data) > 1 else 0.0
    return RunSummary(mean=float(data.mean()), std=std, runs=len(data))


def relative_improvement(baseline: float, value: float) -> float:
    """Percentage change of ``value`` over ``baseline``."""
    if baseline == 0:
        raise ValueError("relative improvement over a zero baseline")
    return (value - baseline) / abs(baseline) * 100.0


# ---------- inputs ----------

class CaseRecord(BaseModel):
    model_config = ConfigDict(extra="ignore")

    context: List[str] = Field(default_factory=list)
    recommended: List[str] = Field(default_factory=list)


def _load(adapter: TypeAdapter, stream: Stream, source: str):
    try:
        return adapter.validate_json(read_bytes(stream))
    except ValidationError as exc:
        raise ingest_error_from(exc, source) from exc


def load_items(stream: Stream, source: str = "<items>") -> List[McqItem]:
    return _load(TypeAdapter(List[McqItem]), stream, source)


def load_rules(stream: Stream, source: str = "<rules>") -> List[Rule]:
    return _load(TypeAdapter(List[Rule]), stream, source)


def load_cases(stream: Stream, rules: Sequence[Rule], source: str = "<cases>") -> List[SafetyCase]:
    """Cases share one rule table."""
    records = _load(TypeAdapter(List[CaseRecord]), stream, source)
    return [SafetyCase(context=r.context, recommended=r.recommended, rules=list(rules)) for r in records]


def load_strings(stream: Stream, source: str = "<responses>") -> List[str]:
    return _load(TypeAdapter(List[str]), stream, source)


class TextPair(BaseModel):
    candidate: str
    reference: str


def load_pairs(stream: Stream, source: str = "<pairs>") -> List[TextPair]:
    return _load(TypeAdapter(List[TextPair]), stream, source)
