import enum
import re
import uuid
from typing import FrozenSet, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Entity ids are uuid5 of the case-folded canonical name, so a graph reloaded
# from its export keeps the same ids.
ENTITY_NAMESPACE = uuid.UUID("6f1c2a4e-9b7d-5e3f-8a21-4c0d9e7b3f15")

_LAYER_CODE = re.compile(r"^[Ll]\d+$")


class LayerLabel(str, enum.Enum):
    SYNDROME = "L1"
    DIAGNOSTIC = "L2"
    GENE = "L3"
    TREATMENT = "L4"
    OUTCOME = "L5"
    OTHER = "Other"


_BY_NAME = {label.name.casefold(): label for label in LayerLabel if label is not LayerLabel.OTHER}
_BY_CODE = {label.value.casefold(): label for label in LayerLabel if label is not LayerLabel.OTHER}


class Layer(BaseModel):
    """One of the five clinical strata, or ``Other`` with a free tag (e.g. Protein)."""
    model_config = ConfigDict(frozen=True)

    label: LayerLabel
    tag: Optional[str] = None

    @model_validator(mode="after")
    def _check_tag(self) -> "Layer":
        if self.label is LayerLabel.OTHER:
            tag = (self.tag or "").strip()
            if not tag:
                raise ValueError("Other layer needs a non-empty tag")
            key = tag.casefold()
            if key in _BY_NAME or key in _BY_CODE or key == "other" or _LAYER_CODE.match(tag):
                raise ValueError(f"tag {tag!r} is reserved for a standard layer")
            object.__setattr__(self, "tag", tag)
        elif self.tag is not None:
            raise ValueError("only the Other layer carries a tag")
        return self

    @classmethod
    def parse(cls, value: str) -> "Layer":
        """Accept "L1".."L5", the layer names, or any other tag as ``Other``.

        Raises ValueError for empty strings and unknown ``L<n>`` codes.
        """
        if not isinstance(value, str) or not value.strip():
            raise ValueError("layer must be a non-empty string")
        text = value.strip()
        key = text.casefold()
        if key in _BY_CODE:
            return cls(label=_BY_CODE[key])
        if key in _BY_NAME:
            return cls(label=_BY_NAME[key])
        if _LAYER_CODE.match(text) or key == "other":
            raise ValueError(f"unknown layer {value!r}")
        if key.startswith("other:"):
            text = text.split(":", 1)[1]
        return cls(label=LayerLabel.OTHER, tag=text)

    @property
    def code(self) -> str:
        return self.tag if self.label is LayerLabel.OTHER else self.label.value

    def __str__(self) -> str:
        return self.code


SYNDROME = Layer(label=LayerLabel.SYNDROME)
DIAGNOSTIC = Layer(label=LayerLabel.DIAGNOSTIC)
GENE = Layer(label=LayerLabel.GENE)
TREATMENT = Layer(label=LayerLabel.TREATMENT)
OUTCOME = Layer(label=LayerLabel.OUTCOME)
STANDARD_LAYERS = (SYNDROME, DIAGNOSTIC, GENE, TREATMENT, OUTCOME)


def entity_id_for(canonical_name: str) -> str:
    return str(uuid.uuid5(ENTITY_NAMESPACE, canonical_name.strip().casefold()))


class Entity(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str = ""
    canonical_name: str
    layer: Layer
    identifier: str = ""
    ontology_source: str = ""
    aliases: FrozenSet[str] = Field(default_factory=frozenset)
    definition: str = ""

    @field_validator("layer", mode="before")
    @classmethod
    def _parse_layer(cls, value):
        if isinstance(value, str):
            return Layer.parse(value)
        return value

    @field_validator("canonical_name")
    @classmethod
    def _strip_name(cls, value: str) -> str:
        return value.strip()

    @field_validator("aliases", mode="before")
    @classmethod
    def _clean_aliases(cls, value):
        if value is None:
            return frozenset()
        return frozenset(a.strip() for a in value if isinstance(a, str) and a.strip())

    @model_validator(mode="after")
    def _assign_id(self) -> "Entity":
        if self.canonical_name and not self.id:
            object.__setattr__(self, "id", entity_id_for(self.canonical_name))
        return self

    @property
    def key(self) -> str:
        return self.canonical_name.casefold()

    def surface_forms(self) -> list:
        """Canonical name first, then aliases in case-folded order."""
        return [self.canonical_name] + sorted(self.aliases - {self.canonical_name}, key=lambda a: (a.casefold(), a))
