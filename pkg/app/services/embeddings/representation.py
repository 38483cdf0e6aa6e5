"""
Structure-aware entity representations.

A triple embeds as [head ∥ relation ∥ tail] (3d), each component the unit
embedding of its surface text; the relation label is embedded as-is. An
entity's representation is the componentwise mean over its one-hop triples
(as head or tail, member_of excluded). An entity with no triples gets
[name ∥ 0 ∥ 0].

Means are taken with math.fsum over triples in id order, so the result does
not depend on the order triples were inserted.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.schemas.graph import Triple
from app.services.embeddings.vectors import EmbeddingCache
from app.services.graph.store import Graph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TripleEmbedding:
    triple_id: str
    vector: np.ndarray  # 3d


@dataclass(frozen=True)
class EntityRepresentation:
    entity_id: str
    vector: np.ndarray  # 3d
    neighborhood_size: int


def _component_texts(graph: Graph, triple: Triple) -> tuple[str, str, str]:
    head = graph.entity(triple.head).name
    tail = graph.entity(triple.tail).name
    if not head or not triple.relation or not tail:
        raise ValueError(f"Triple {triple.id} has an empty surface string")
    return head, triple.relation, tail


def triple_embedding(triple: Triple, graph: Graph, cache: EmbeddingCache) -> TripleEmbedding:
    texts = _component_texts(graph, triple)
    cache.prime(texts)
    return TripleEmbedding(
        triple_id=triple.id,
        vector=np.concatenate([cache.get(text) for text in texts]),
    )


def fsum_mean(rows: list[np.ndarray]) -> np.ndarray:
    """Columnwise mean with compensated summation."""
    stacked = np.vstack(rows)
    return np.array([math.fsum(column) for column in stacked.T]) / len(rows)


def entity_representation(
    entity_id: str, graph: Graph, cache: EmbeddingCache
) -> EntityRepresentation:
    neighborhood = graph.incident_triples(entity_id)
    if not neighborhood:
        name_vec = cache.get(graph.entity(entity_id).name)
        zeros = np.zeros(cache.dimension)
        return EntityRepresentation(entity_id, np.concatenate([name_vec, zeros, zeros]), 0)
    rows = [triple_embedding(t, graph, cache).vector for t in neighborhood]
    return EntityRepresentation(entity_id, fsum_mean(rows), len(rows))


def entity_representations(
    graph: Graph, cache: EmbeddingCache, entity_ids: Optional[list[str]] = None
) -> dict[str, EntityRepresentation]:
    """Representations for the given entities (default: all non-community ones)."""
    ids = graph.clusterable_entities() if entity_ids is None else entity_ids

    # one batched provider call for every text involved
    texts: set[str] = set()
    for eid in ids:
        texts.add(graph.entity(eid).name)
        for triple in graph.incident_triples(eid):
            texts.update(_component_texts(graph, triple))
    if texts:
        cache.prime(texts)

    representations = {eid: entity_representation(eid, graph, cache) for eid in ids}
    logger.info("Computed %d entity representations", len(representations))
    return representations
