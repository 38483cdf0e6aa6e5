"""
Extraction reply parser.

Reply grammar, one item per line, TAB-separated:
    TRIPLE     head  head_type  relation  tail  tail_type  confidence
    ATTRIBUTE  entity  entity_type  attribute_type  value  confidence
    PROPOSE    entity_type|relation_type|attribute_type  label  confidence

Design rules enforced here:
  - Never raises on reply content: malformed lines are counted and skipped.
  - Facts are validated against the schema. A fact that fails only because
    it uses labels the schema lacks is diverted: each unknown label becomes
    an expansion candidate carrying the line's confidence.
  - Reserved labels are never proposed.
"""

import logging

from pydantic import ValidationError

from app.schemas.extraction import ExtractedAttribute, ExtractedTriple, ExtractionOutput
from app.schemas.graph import RESERVED_LABELS
from app.schemas.graph_schema import ExpansionCandidate, ExpansionKind, Schema
from app.services.schema.validator import validate_extracted_attribute, validate_extracted_triple

logger = logging.getLogger(__name__)

_FIELD_COUNTS = {"TRIPLE": 7, "ATTRIBUTE": 6, "PROPOSE": 4}


def _confidence(raw: str) -> float:
    value = float(raw)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"confidence {value} outside [0, 1]")
    return value


def _unknown_labels(
    schema: Schema, labels: list[tuple[ExpansionKind, str]]
) -> list[tuple[ExpansionKind, str]]:
    return [(kind, label) for kind, label in labels if label not in schema.labels(kind)]


def parse_extraction(text: str, schema: Schema, chunk_id: str) -> ExtractionOutput:
    output = ExtractionOutput(chunk_id=chunk_id)
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        output.lines_total += 1
        fields = [field.strip() for field in raw.strip().split("\t")]
        tag = fields[0].upper()
        if _FIELD_COUNTS.get(tag) != len(fields):
            output.lines_dropped += 1
            logger.debug("%s line %d: malformed %r", chunk_id, line_no, raw[:80])
            continue
        try:
            _parse_line(tag, fields, schema, output)
        except (ValueError, ValidationError) as exc:
            output.lines_dropped += 1
            logger.debug("%s line %d: %s", chunk_id, line_no, exc)

    if output.lines_dropped:
        logger.warning(
            "Chunk %s: dropped %d of %d reply lines", chunk_id, output.lines_dropped, output.lines_total
        )
    return output


def _parse_line(tag: str, fields: list[str], schema: Schema, output: ExtractionOutput) -> None:
    if tag == "PROPOSE":
        kind = ExpansionKind(fields[1])
        label = fields[2]
        if label in RESERVED_LABELS:
            raise ValueError(f"reserved label {label!r} proposed")
        output.candidates.append(
            ExpansionCandidate(kind=kind, label=label, confidence=_confidence(fields[3]))
        )
        return

    if tag == "TRIPLE":
        fact = ExtractedTriple(
            head=fields[1], head_type=fields[2], relation=fields[3],
            tail=fields[4], tail_type=fields[5], confidence=_confidence(fields[6]),
        )
        result = validate_extracted_triple(schema, fact)
        labels = [
            (ExpansionKind.ENTITY_TYPE, fact.head_type),
            (ExpansionKind.RELATION_TYPE, fact.relation),
            (ExpansionKind.ENTITY_TYPE, fact.tail_type),
        ]
        target = output.triples
    else:
        fact = ExtractedAttribute(
            entity=fields[1], entity_type=fields[2], key=fields[3],
            value=fields[4], confidence=_confidence(fields[5]),
        )
        result = validate_extracted_attribute(schema, fact)
        labels = [
            (ExpansionKind.ENTITY_TYPE, fact.entity_type),
            (ExpansionKind.ATTRIBUTE_TYPE, fact.key),
        ]
        target = output.attributes

    if result.accepted:
        target.append(fact)
        return

    unknown = _unknown_labels(schema, labels)
    if not unknown or any(label in RESERVED_LABELS for _, label in unknown):
        raise ValueError(result.violation or "schema violation")
    seen = set()
    for kind, label in unknown:
        if (kind, label) in seen:
            continue
        seen.add((kind, label))
        output.candidates.append(
            ExpansionCandidate(kind=kind, label=label, confidence=fact.confidence)
        )
    output.lines_diverted += 1
