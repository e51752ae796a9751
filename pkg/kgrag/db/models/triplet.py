import enum
from typing import NamedTuple

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator

# The six templated relation types; any other non-empty name is admitted too.
CANONICAL_RELATIONS = (
    "treats",
    "contraindicated_with",
    "associated_with",
    "characteristic_of",
    "encodes",
    "expressed_in",
)


class Provenance(str, enum.Enum):
    RULE_BASED = "rule_based"
    EXTERNAL_EXTRACTOR = "external_extractor"
    MANUAL = "manual"


class RelationLabel(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)

    @field_validator("name")
    @classmethod
    def _strip(cls, value: str) -> str:
        value = value.strip()
        if not value:
            raise ValueError("relation name must be non-empty")
        return value

    @computed_field
    @property
    def canonical(self) -> bool:
        return self.name in CANONICAL_RELATIONS

    @classmethod
    def of(cls, value) -> "RelationLabel":
        return value if isinstance(value, cls) else cls(name=value)

    def __str__(self) -> str:
        return self.name


class TripletKey(NamedTuple):
    head: str
    relation: str
    tail: str


class Triplet(BaseModel):
    """Directed evidence-weighted edge; ``low_evidence`` follows ``paper_count``."""
    model_config = ConfigDict(frozen=True)

    head: str
    relation: RelationLabel
    tail: str
    paper_count: int = Field(..., ge=1)
    provenance: Provenance = Provenance.MANUAL

    @field_validator("relation", mode="before")
    @classmethod
    def _relation(cls, value):
        return RelationLabel(name=value) if isinstance(value, str) else value

    @computed_field
    @property
    def low_evidence(self) -> bool:
        return self.paper_count < 2

    @property
    def key(self) -> TripletKey:
        return TripletKey(self.head, self.relation.name, self.tail)

    def merged_with(self, paper_count: int, provenance: Provenance) -> "Triplet":
        # manual curation wins; otherwise the first provenance is kept
        keep = Provenance.MANUAL if provenance is Provenance.MANUAL else self.provenance
        return self.model_copy(update={"paper_count": self.paper_count + paper_count, "provenance": keep})
