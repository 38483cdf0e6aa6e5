"""
Graph record shapes: entities and triples as stored and persisted.

Reserved labels are engine constants, never schema entries:
  has_attribute : entity → attribute-value node
  member_of     : entity → community node (inserted by the knowledge tree)
  community     : etype of community nodes
  attribute     : etype of attribute-value nodes
"""

from enum import Enum

from pydantic import Field, model_validator

from app.schemas.common import BaseSchema

HAS_ATTRIBUTE = "has_attribute"
MEMBER_OF = "member_of"
COMMUNITY_ETYPE = "community"
ATTRIBUTE_ETYPE = "attribute"

RESERVED_RELATIONS = frozenset({HAS_ATTRIBUTE, MEMBER_OF})
RESERVED_ETYPES = frozenset({COMMUNITY_ETYPE, ATTRIBUTE_ETYPE})
RESERVED_LABELS = RESERVED_RELATIONS | RESERVED_ETYPES


class TripleKind(str, Enum):
    ENTITY_RELATION = "entity-relation"
    ATTRIBUTE = "attribute"
    MEMBER_OF = "member_of"


def classify_relation(relation: str) -> TripleKind:
    """Kind is determined by the reserved label alone."""
    if relation == HAS_ATTRIBUTE:
        return TripleKind.ATTRIBUTE
    if relation == MEMBER_OF:
        return TripleKind.MEMBER_OF
    return TripleKind.ENTITY_RELATION


class EntityRecord(BaseSchema):
    id: str
    name: str
    etype: str = Field(..., min_length=1)
    attributes: dict[str, str] = Field(default_factory=dict)
    is_community_node: bool = False

    @property
    def is_attribute_value(self) -> bool:
        return self.etype == ATTRIBUTE_ETYPE


class Triple(BaseSchema):
    id: str
    head: str
    relation: str = Field(..., min_length=1)
    tail: str
    provenance: str = ""  # chunk id; empty for structural member_of edges
    kind: TripleKind

    @model_validator(mode="after")
    def _kind_matches_relation(self) -> "Triple":
        expected = classify_relation(self.relation)
        if self.kind != expected:
            raise ValueError(
                f"Triple {self.id}: kind {self.kind.value!r} does not match "
                f"relation {self.relation!r} (expected {expected.value!r})"
            )
        return self

    @property
    def dedupe_key(self) -> tuple[str, str, str, str]:
        return (self.head, self.relation, self.tail, self.provenance)
