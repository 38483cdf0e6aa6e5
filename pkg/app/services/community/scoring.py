"""
Dual-perception scoring of an entity against a community.

    S_r  multiset Jaccard of the entity's incident relation labels against
         the pooled labels of the community's other members (Σmin / Σmax)
    S_s  cosine of F·T_e against Σ_j F·T_j over the other members,
         clamped at 0 (a singleton community scores itself: 1.0)
    φ    S_r + λ·S_s, in [0, 1 + λ]

"Other members" means the entity is left out when it belongs to the
community and the community has anyone else in it.
"""

import logging
from collections import Counter
from typing import Optional, Sequence

import numpy as np

from app.schemas.common import id_sort_key
from app.schemas.community import DetectionParams
from app.services.embeddings.vectors import cosine
from app.services.graph.store import Graph

logger = logging.getLogger(__name__)


def multiset_jaccard(a: Counter, b: Counter) -> float:
    labels = set(a) | set(b)
    if not labels:
        return 0.0
    low = sum(min(a[label], b[label]) for label in labels)
    high = sum(max(a[label], b[label]) for label in labels)
    return low / high if high else 0.0


def dual_score(relation_score: float, semantic_score: float, semantic_weight: float) -> float:
    return relation_score + semantic_weight * semantic_score


def relation_overlap(
    graph: Graph, entity_id: str, members: Sequence[str], include_attributes: bool = True
) -> float:
    own = graph.incident_relations(entity_id, include_attributes=include_attributes)
    pooled: Counter = Counter()
    for member in members:
        if member != entity_id:
            pooled.update(graph.incident_relations(member, include_attributes=include_attributes))
    return multiset_jaccard(own, pooled)


def semantic_similarity(
    entity_id: str,
    members: Sequence[str],
    representations: dict[str, np.ndarray],
    transform: Optional[np.ndarray] = None,
) -> float:
    def lift(eid: str) -> np.ndarray:
        vec = np.asarray(representations[eid], dtype=np.float64)
        return vec if transform is None else transform @ vec

    others = [m for m in members if m != entity_id]
    target = lift(entity_id)
    if not others:
        return max(0.0, cosine(target, target))
    total = np.sum([lift(m) for m in others], axis=0)
    return max(0.0, cosine(target, total))


class ScoringContext:
    """
    Caches per-entity label multisets and transformed representations, and
    per-group pooled totals and centers, so φ for any (entity, group) pair is
    cheap. Groups are addressed by their position in `groups` and never change
    once added.
    """

    def __init__(
        self,
        graph: Graph,
        representations: dict[str, np.ndarray],
        params: DetectionParams,
        groups: Sequence[Sequence[str]],
    ):
        self.params = params
        entity_ids = sorted({eid for group in groups for eid in group}, key=id_sort_key)
        self.multisets = {
            eid: graph.incident_relations(eid, include_attributes=params.include_attribute_edges)
            for eid in entity_ids
        }
        transform = params.transform
        self.lifted = {
            eid: (
                np.asarray(representations[eid], dtype=np.float64)
                if transform is None
                else transform @ np.asarray(representations[eid], dtype=np.float64)
            )
            for eid in entity_ids
        }
        self.groups: list[list[str]] = []
        self._label_totals: list[Counter] = []
        self._centers: dict[int, str] = {}
        self._vector_totals: list[np.ndarray] = []
        for group in groups:
            self.add_group(group)

    def add_group(self, members: Sequence[str]) -> int:
        members = sorted(members, key=id_sort_key)
        labels: Counter = Counter()
        for eid in members:
            labels.update(self.multisets[eid])
        self.groups.append(members)
        self._label_totals.append(labels)
        self._vector_totals.append(np.sum([self.lifted[eid] for eid in members], axis=0))
        return len(self.groups) - 1

    def relation_overlap(self, entity_id: str, group: int) -> float:
        pooled = self._label_totals[group]
        if entity_id in self.groups[group]:
            pooled = pooled - self.multisets[entity_id]
        return multiset_jaccard(self.multisets[entity_id], pooled)

    def semantic_similarity(self, entity_id: str, group: int) -> float:
        target = self.lifted[entity_id]
        members = self.groups[group]
        if entity_id in members:
            if len(members) == 1:
                return max(0.0, cosine(target, target))
            others = [m for m in members if m != entity_id]
            total = np.sum([self.lifted[m] for m in others], axis=0)
        else:
            total = self._vector_totals[group]
        return max(0.0, cosine(target, total))

    def phi(self, entity_id: str, group: int) -> float:
        return dual_score(
            self.relation_overlap(entity_id, group),
            self.semantic_similarity(entity_id, group),
            self.params.semantic_weight,
        )

    def ranked_members(self, group: int) -> list[tuple[str, float]]:
        """Members by descending φ against their own group, ties to the lower id."""
        scored = [(eid, self.phi(eid, group)) for eid in self.groups[group]]
        return sorted(scored, key=lambda pair: (-pair[1], id_sort_key(pair[0])))

    def center(self, group: int) -> str:
        if group not in self._centers:
            self._centers[group] = self.ranked_members(group)[0][0]
        return self._centers[group]

    def divergence(self, a: int, b: int) -> float:
        """Center-approximated divergence between two groups."""
        ca, cb = self.center(a), self.center(b)
        return max(
            abs(self.phi(ca, a) - self.phi(ca, b)),
            abs(self.phi(cb, b) - self.phi(cb, a)),
        )

    def exact_divergence(self, a: int, b: int) -> float:
        """Brute-force divergence: mean φ over every member instead of the center."""

        def mean_phi(members: list[str], group: int) -> float:
            return sum(self.phi(eid, group) for eid in members) / len(members)

        members_a, members_b = self.groups[a], self.groups[b]
        return max(
            abs(mean_phi(members_a, a) - mean_phi(members_a, b)),
            abs(mean_phi(members_b, b) - mean_phi(members_b, a)),
        )
