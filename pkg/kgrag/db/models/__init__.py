from .entity import (
    DIAGNOSTIC,
    GENE,
    OUTCOME,
    STANDARD_LAYERS,
    SYNDROME,
    TREATMENT,
    Entity,
    Layer,
    LayerLabel,
    entity_id_for,
)
from .records import EdgeRecord, NodeRecord
from .triplet import CANONICAL_RELATIONS, Provenance, RelationLabel, Triplet, TripletKey
