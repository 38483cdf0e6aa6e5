"""
Community detection: three stages over the non-community entities:

  1. Initialize: k-means on the entity representations with
     k = min(max(2, ⌊n/β⌋), η), n_init restarts and a fixed random_state.
     Empty clusters are dropped and groups are numbered by their smallest
     member id.
  2. Fuse: repeated merge passes. In one pass every pair of groups is
     scored by the center-approximated divergence; pairs under ε merge
     greedily in ascending (divergence, a, b) order, each group merging at
     most once. Stops when a pass merges nothing or after max_merge_passes.
  3. Centers: each final group's member with the highest φ.

Community nodes and member_of edges are invisible here, so detection on a
graph that already carries a knowledge tree sees the same input.
There is no reassignment of entities after initialization.
"""

import logging
import warnings
from collections import defaultdict
from typing import Optional

import numpy as np
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from app.schemas.common import id_sort_key
from app.schemas.community import Community, DetectionParams, Partition
from app.services.community.scoring import ScoringContext
from app.services.embeddings.representation import entity_representations
from app.services.embeddings.vectors import EmbeddingCache
from app.services.graph.store import Graph

logger = logging.getLogger(__name__)


def cluster_count(n_entities: int, granularity: int = 10, max_clusters: int = 200) -> int:
    if n_entities < 1:
        raise ValueError(f"n_entities must be >= 1, got {n_entities}")
    if granularity < 1 or max_clusters < 2:
        raise ValueError("granularity must be >= 1 and max_clusters >= 2")
    return min(max(2, n_entities // granularity), max_clusters)


def _partition_from_groups(groups: list[list[str]], iteration: int = 0) -> Partition:
    assignments = {eid: index for index, group in enumerate(groups) for eid in group}
    return Partition(assignments=assignments, iteration=iteration)


def compact(labels: dict[str, int]) -> list[list[str]]:
    """Drop empty clusters; order groups by their smallest member id."""
    buckets: dict[int, list[str]] = defaultdict(list)
    for eid, label in labels.items():
        buckets[label].append(eid)
    groups = [sorted(members, key=id_sort_key) for members in buckets.values() if members]
    return sorted(groups, key=lambda members: id_sort_key(members[0]))


def init_clusters(representations: dict[str, np.ndarray], params: DetectionParams) -> Partition:
    entity_ids = sorted(representations, key=id_sort_key)
    if len(entity_ids) < 2:
        return _partition_from_groups([entity_ids] if entity_ids else [])

    matrix = np.vstack([np.asarray(representations[eid], dtype=np.float64) for eid in entity_ids])
    distinct = len(np.unique(matrix, axis=0))
    k = min(cluster_count(len(entity_ids), params.granularity, params.max_clusters), distinct)
    if k < 2:
        return _partition_from_groups([entity_ids])

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=ConvergenceWarning)
        model = KMeans(n_clusters=k, n_init=params.n_init, random_state=params.seed)
        labels = model.fit_predict(matrix)

    groups = compact({eid: int(label) for eid, label in zip(entity_ids, labels)})
    logger.info("k-means: %d entities → %d clusters (k=%d)", len(entity_ids), len(groups), k)
    return _partition_from_groups(groups)


def merge_pass(
    groups: list[list[str]], context: ScoringContext, params: DetectionParams
) -> tuple[list[list[str]], list[tuple[int, int]]]:
    """
    One fusion pass. Returns the new groups and the merged (a, b) index pairs;
    a merged group takes the lower index.
    """
    if len(groups) < 2:
        return groups, []

    candidates = []
    for a in range(len(groups)):
        for b in range(a + 1, len(groups)):
            div = context.divergence(a, b)
            if div < params.merge_threshold:
                candidates.append((div, a, b))
    candidates.sort()

    used: set[int] = set()
    merged: list[tuple[int, int]] = []
    for _, a, b in candidates:
        if a in used or b in used:
            continue
        used.update((a, b))
        merged.append((a, b))

    if not merged:
        return groups, []

    absorbed = {b: a for a, b in merged}
    partner = {a: b for a, b in merged}
    new_groups = []
    for index, members in enumerate(groups):
        if index in absorbed:
            continue
        if index in partner:
            members = members + groups[partner[index]]
        new_groups.append(sorted(members, key=id_sort_key))
    return new_groups, sorted(merged)


def fuse(
    graph: Graph,
    partition: Partition,
    representations: dict[str, np.ndarray],
    params: DetectionParams,
) -> tuple[list[list[str]], ScoringContext, int]:
    groups = partition.groups()
    context = ScoringContext(graph, representations, params, groups)
    passes = 0
    while passes < params.max_merge_passes and len(groups) >= 2:
        groups, merged = merge_pass(groups, context, params)
        passes += 1
        if not merged:
            break
        logger.info("Merge pass %d: merged %s, %d communities remain", passes, merged, len(groups))
        context = ScoringContext(graph, representations, params, groups)
    return groups, context, passes


def detect_communities(
    graph: Graph,
    cache: EmbeddingCache,
    params: DetectionParams,
    representations: Optional[dict[str, np.ndarray]] = None,
) -> list[Community]:
    entity_ids = graph.clusterable_entities()
    if not entity_ids:
        logger.warning("No entities to cluster; detection produced no communities")
        return []
    if representations is None:
        representations = {
            eid: rep.vector for eid, rep in entity_representations(graph, cache, entity_ids).items()
        }

    partition = init_clusters(representations, params)
    groups, context, passes = fuse(graph, partition, representations, params)

    communities = [
        Community(index=index, members=members, center=context.center(index))
        for index, members in enumerate(groups)
    ]
    logger.info(
        "Detected %d communities over %d entities in %d merge passes",
        len(communities),
        len(entity_ids),
        passes,
    )
    return communities
