"""
Graph schema shapes: the typed vocabulary that bounds extraction and
query decomposition, plus expansion candidates and validation results.
"""

from enum import Enum
from typing import Optional

from pydantic import Field, field_validator, model_validator

from app.schemas.common import FrozenSchema
from app.schemas.graph import RESERVED_LABELS


class SchemaValidationError(ValueError):
    """Raised when a schema value breaks its invariants."""


class ExpansionKind(str, Enum):
    ENTITY_TYPE = "entity_type"
    RELATION_TYPE = "relation_type"
    ATTRIBUTE_TYPE = "attribute_type"


class Schema(FrozenSchema):
    entity_types: frozenset[str]
    relation_types: frozenset[str]
    attribute_types: frozenset[str]
    version: int = Field(default=0, ge=0)

    @field_validator("entity_types", "relation_types", "attribute_types")
    @classmethod
    def _strip_labels(cls, labels: frozenset[str]) -> frozenset[str]:
        return frozenset(label.strip() for label in labels if label.strip())

    @model_validator(mode="after")
    def _check_invariants(self) -> "Schema":
        for section in ("entity_types", "relation_types", "attribute_types"):
            labels = getattr(self, section)
            if not labels:
                raise ValueError(
                    f"{section} must be nonempty after seeding"
                )
            clash = labels & RESERVED_LABELS
            if clash:
                raise ValueError(
                    f"{section} uses reserved labels: {sorted(clash)}"
                )
        return self

    def labels(self, kind: ExpansionKind) -> frozenset[str]:
        return {
            ExpansionKind.ENTITY_TYPE: self.entity_types,
            ExpansionKind.RELATION_TYPE: self.relation_types,
            ExpansionKind.ATTRIBUTE_TYPE: self.attribute_types,
        }[kind]

    def contains(self, label: str) -> bool:
        return (
            label in self.entity_types
            or label in self.relation_types
            or label in self.attribute_types
        )

    def issubset(self, other: "Schema") -> bool:
        return (
            self.entity_types <= other.entity_types
            and self.relation_types <= other.relation_types
            and self.attribute_types <= other.attribute_types
        )

    def prompt_variables(self) -> dict[str, str]:
        """Label lists as rendered into extraction and decomposition prompts."""
        return {
            "entity_types": ", ".join(sorted(self.entity_types)),
            "relation_types": ", ".join(sorted(self.relation_types)),
            "attribute_types": ", ".join(sorted(self.attribute_types)),
        }


class ExpansionCandidate(FrozenSchema):
    kind: ExpansionKind
    label: str = Field(..., min_length=1)
    confidence: float = Field(..., ge=0.0, le=1.0)
    support: int = Field(default=1, ge=1)


class ValidationResult(FrozenSchema):
    accepted: bool
    violation: Optional[str] = None  # first violated constraint, if any

    @classmethod
    def ok(cls) -> "ValidationResult":
        return cls(accepted=True)

    @classmethod
    def reject(cls, violation: str) -> "ValidationResult":
        return cls(accepted=False, violation=violation)
