"""Community detection shapes."""

from typing import Optional

import numpy as np
from pydantic import ConfigDict, Field, field_validator

from app.schemas.common import BaseSchema, FrozenSchema


class DetectionParams(FrozenSchema):
    """
    Knobs for dual-perception detection.

    semantic_weight   λ: weight of the embedding term in φ
    merge_threshold   ε: communities merge when their divergence is below it
    granularity       β: k = min(max(2, ⌊n/β⌋), η)
    max_clusters      η
    transform         optional square matrix applied to representations
                      before the semantic term (None = identity)
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    semantic_weight: float = Field(default=0.5, ge=0.0)
    merge_threshold: float = Field(default=0.1, ge=0.0)
    granularity: int = Field(default=10, ge=1)
    max_clusters: int = Field(default=200, ge=2)
    seed: int = 42
    n_init: int = Field(default=5, ge=1)
    max_merge_passes: int = Field(default=10, ge=0)
    include_attribute_edges: bool = True
    keywords_per_community: int = Field(default=5, ge=1)
    transform: Optional[np.ndarray] = None

    @field_validator("transform")
    @classmethod
    def _square_matrix(cls, value: Optional[np.ndarray]) -> Optional[np.ndarray]:
        if value is None:
            return None
        matrix = np.asarray(value, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"transform must be a square matrix, got {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("transform contains non-finite values")
        return matrix


class Partition(BaseSchema):
    """Entity id → community index, indexes contiguous from 0."""

    assignments: dict[str, int]
    iteration: int = 0

    def groups(self) -> list[list[str]]:
        size = max(self.assignments.values(), default=-1) + 1
        groups: list[list[str]] = [[] for _ in range(size)]
        for entity_id, index in self.assignments.items():
            groups[index].append(entity_id)
        return groups


class Community(BaseSchema):
    index: int
    members: list[str] = Field(..., min_length=1)  # sorted entity ids
    center: str
    name: str = ""
    description: str = ""
    keywords: list[str] = Field(default_factory=list)
    node_id: Optional[str] = None  # community node inserted by the knowledge tree

    @field_validator("center")
    @classmethod
    def _center_nonempty(cls, value: str) -> str:
        if not value:
            raise ValueError("community center must be set")
        return value

    def summary_text(self) -> str:
        """Text embedded for community filtering."""
        return f"{self.name}: {self.description}"
