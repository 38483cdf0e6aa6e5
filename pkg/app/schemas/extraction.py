"""
Extraction shapes: what one chunk's extraction call yields before it is
merged into the graph.

Facts carry surface names and declared types, not graph ids; ids are only
assigned when the serial commit merges a batch.
"""

from pydantic import Field

from app.schemas.common import BaseSchema, FrozenSchema
from app.schemas.graph_schema import ExpansionCandidate


class ExtractedTriple(FrozenSchema):
    head: str = Field(..., min_length=1)
    head_type: str = Field(..., min_length=1)
    relation: str = Field(..., min_length=1)
    tail: str = Field(..., min_length=1)
    tail_type: str = Field(..., min_length=1)
    confidence: float = Field(default=1.0, ge=0.0, le=1.0)


class ExtractedAttribute(FrozenSchema):
    entity: str = Field(..., min_length=1)
    entity_type: str = Field(..., min_length=1)
    key: str = Field(..., min_length=1)
    value: str = Field(..., min_length=1)
    confidence: float = Field(default=1.0, ge=0.0, le=1.0)


class Chunk(FrozenSchema):
    id: str
    doc_id: str
    text: str


class ExtractionOutput(BaseSchema):
    chunk_id: str
    triples: list[ExtractedTriple] = Field(default_factory=list)
    attributes: list[ExtractedAttribute] = Field(default_factory=list)
    candidates: list[ExpansionCandidate] = Field(default_factory=list)
    lines_total: int = 0
    lines_dropped: int = 0   # malformed or schema-invalid, nothing proposed
    lines_diverted: int = 0  # rejected facts that proposed new labels

    @property
    def fact_count(self) -> int:
        return len(self.triples) + len(self.attributes)


class GraphBatch(BaseSchema):
    """One serial commit: chunk texts plus the facts they yielded."""

    chunks: dict[str, str] = Field(default_factory=dict)
    triples: list[tuple[str, ExtractedTriple]] = Field(default_factory=list)  # (chunk id, fact)
    attributes: list[tuple[str, ExtractedAttribute]] = Field(default_factory=list)

    def add_output(self, output: ExtractionOutput, text: str) -> None:
        self.chunks[output.chunk_id] = text
        self.triples.extend((output.chunk_id, t) for t in output.triples)
        self.attributes.extend((output.chunk_id, a) for a in output.attributes)


class Document(FrozenSchema):
    id: str = Field(..., min_length=1)
    text: str
