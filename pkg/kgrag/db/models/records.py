from typing import Annotated, List

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, StrictInt, field_validator

from kgrag.db.models.entity import Layer
from kgrag.db.models.triplet import Provenance

_NonEmpty = Annotated[str, Field(min_length=1)]


class NodeRecord(BaseModel):
    """One entry of a node file. ``aliases`` and ``definition`` extend the published schema."""
    model_config = ConfigDict(extra="ignore", str_strip_whitespace=True)

    name: _NonEmpty
    identifier: str
    source: str
    layer: _NonEmpty
    aliases: List[str] = Field(default_factory=list)
    definition: str = ""

    _origin: str = PrivateAttr(default="")

    @field_validator("layer")
    @classmethod
    def _valid_layer(cls, value: str) -> str:
        Layer.parse(value)
        return value

    @property
    def origin(self) -> str:
        return self._origin


class EdgeRecord(BaseModel):
    model_config = ConfigDict(extra="ignore", str_strip_whitespace=True)

    head: _NonEmpty
    relation: _NonEmpty
    tail: _NonEmpty
    paper_count: Annotated[StrictInt, Field(gt=0)]
    provenance: Provenance = Provenance.MANUAL

    _origin: str = PrivateAttr(default="")

    @property
    def origin(self) -> str:
        return self._origin
