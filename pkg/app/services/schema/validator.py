"""
Schema validation: pure checks of facts against the typed vocabulary.

Validation never raises: every check returns a ValidationResult naming the
first violated constraint, in the order head type → relation (or attribute
key) → tail type.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

from app.schemas.extraction import ExtractedAttribute, ExtractedTriple
from app.schemas.graph import HAS_ATTRIBUTE, MEMBER_OF, Triple, TripleKind
from app.schemas.graph_schema import Schema, ValidationResult

logger = logging.getLogger(__name__)


def validate_labels(
    schema: Schema,
    relation: str,
    head_type: str,
    tail_type: Optional[str] = None,
    attribute_key: Optional[str] = None,
) -> ValidationResult:
    if head_type not in schema.entity_types:
        return ValidationResult.reject(f"head entity type {head_type!r} not in schema")
    if relation == HAS_ATTRIBUTE:
        if attribute_key not in schema.attribute_types:
            return ValidationResult.reject(
                f"attribute type {attribute_key!r} not in schema"
            )
        return ValidationResult.ok()
    if relation == MEMBER_OF:
        return ValidationResult.reject("member_of is structural, not an extracted fact")
    if relation not in schema.relation_types:
        return ValidationResult.reject(f"relation type {relation!r} not in schema")
    if tail_type not in schema.entity_types:
        return ValidationResult.reject(f"tail entity type {tail_type!r} not in schema")
    return ValidationResult.ok()


def validate_triple(
    schema: Schema,
    triple: Triple,
    head_type: str,
    tail_type: str,
    attribute_key: Optional[str] = None,
) -> ValidationResult:
    """Check a stored triple given its endpoints' entity types."""
    return validate_labels(schema, triple.relation, head_type, tail_type, attribute_key)


def validate_extracted_triple(schema: Schema, fact: ExtractedTriple) -> ValidationResult:
    return validate_labels(schema, fact.relation, fact.head_type, fact.tail_type)


def validate_extracted_attribute(
    schema: Schema, fact: ExtractedAttribute
) -> ValidationResult:
    return validate_labels(schema, HAS_ATTRIBUTE, fact.entity_type, attribute_key=fact.key)


@dataclass
class ComplianceReport:
    checked: int = 0
    violations: list[tuple[str, str]] = field(default_factory=list)  # (triple id, reason)

    @property
    def compliant(self) -> bool:
        return not self.violations

    @property
    def compliance_rate(self) -> float:
        if self.checked == 0:
            return 1.0
        return (self.checked - len(self.violations)) / self.checked


def validate_graph(schema: Schema, graph) -> ComplianceReport:
    """Validate every extracted triple in the graph; member_of edges are skipped."""
    report = ComplianceReport()
    for tid, triple in graph.triples.items():
        if triple.kind == TripleKind.MEMBER_OF:
            continue
        report.checked += 1
        head = graph.entity(triple.head)
        tail = graph.entity(triple.tail)
        key = graph.attribute_key(triple) if triple.kind == TripleKind.ATTRIBUTE else None
        result = validate_triple(schema, triple, head.etype, tail.etype, key)
        if not result.accepted:
            report.violations.append((tid, result.violation))
    if report.violations:
        logger.warning(
            "Graph has %d schema violations out of %d triples",
            len(report.violations),
            report.checked,
        )
    return report
