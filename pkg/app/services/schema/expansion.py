"""
Schema expansion: admit newly proposed labels into the schema.

Extraction proposes labels with a self-reported confidence. Proposals are
pooled across documents: support counts the distinct documents that proposed
a label, confidence is the mean of the reported values. A pooled candidate is
accepted iff
    confidence >= mu  AND  support >= min_support  AND  label not yet present.

Expansion never edits a schema in place; it returns a new value whose version
is bumped iff something was accepted. Accepted sets only grow.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from app.schemas.graph import RESERVED_LABELS
from app.schemas.graph_schema import ExpansionCandidate, ExpansionKind, Schema

logger = logging.getLogger(__name__)

DEFAULT_MU = 0.8
DEFAULT_MIN_SUPPORT = 2


@dataclass
class ExpansionResult:
    schema: Schema
    accepted: list[ExpansionCandidate] = field(default_factory=list)
    rejected: list[tuple[ExpansionCandidate, str]] = field(default_factory=list)

    @property
    def changed(self) -> bool:
        return bool(self.accepted)


def _candidate_order(candidate: ExpansionCandidate) -> tuple:
    return (candidate.kind.value, candidate.label, -candidate.confidence, -candidate.support)


def pool_candidates(
    proposals: Iterable[tuple[str, ExpansionCandidate]],
) -> list[ExpansionCandidate]:
    """
    Merge (document id, candidate) proposals per (kind, label). Repeated
    proposals from one document count once toward support but every reported
    confidence enters the mean.
    """
    docs: dict[tuple[ExpansionKind, str], set[str]] = defaultdict(set)
    confidences: dict[tuple[ExpansionKind, str], list[float]] = defaultdict(list)
    for doc_id, candidate in proposals:
        key = (candidate.kind, candidate.label)
        docs[key].add(doc_id)
        confidences[key].append(candidate.confidence)

    pooled = [
        ExpansionCandidate(
            kind=kind,
            label=label,
            confidence=min(1.0, math.fsum(confidences[(kind, label)]) / len(confidences[(kind, label)])),
            support=len(docs[(kind, label)]),
        )
        for kind, label in docs
    ]
    return sorted(pooled, key=_candidate_order)


def apply_expansion(
    schema: Schema,
    candidates: Iterable[ExpansionCandidate],
    mu: float = DEFAULT_MU,
    min_support: int = DEFAULT_MIN_SUPPORT,
) -> ExpansionResult:
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must be in [0, 1], got {mu}")
    if min_support < 1:
        raise ValueError(f"min_support must be >= 1, got {min_support}")

    additions: dict[ExpansionKind, set[str]] = {kind: set() for kind in ExpansionKind}
    result = ExpansionResult(schema=schema)

    for candidate in sorted(candidates, key=_candidate_order):
        label = candidate.label.strip()
        if label in RESERVED_LABELS:
            reason = "reserved label"
        elif label in schema.labels(candidate.kind) or label in additions[candidate.kind]:
            reason = "duplicate"
        elif candidate.confidence < mu:
            reason = f"confidence {candidate.confidence:.2f} < mu {mu:.2f}"
        elif candidate.support < min_support:
            reason = f"support {candidate.support} < {min_support}"
        else:
            additions[candidate.kind].add(label)
            result.accepted.append(candidate)
            continue
        result.rejected.append((candidate, reason))

    if result.accepted:
        result.schema = Schema(
            entity_types=schema.entity_types | additions[ExpansionKind.ENTITY_TYPE],
            relation_types=schema.relation_types | additions[ExpansionKind.RELATION_TYPE],
            attribute_types=schema.attribute_types | additions[ExpansionKind.ATTRIBUTE_TYPE],
            version=schema.version + 1,
        )
        logger.info(
            "Schema expanded to v%d: %s",
            result.schema.version,
            ", ".join(f"{c.kind.value}:{c.label}" for c in result.accepted),
        )
    return result
