"""
The four retrieval routes. Each takes an already-embedded sub-query and
searches read-only indexes, so routes for many sub-queries can run side by
side without provider calls.

    entity     entity names, plus attribute entries folded in: an entity
               scores the max of its name match and its "entity key" matches
    triple     L2 triples verbalized "head relation tail"
    community  "name: description" of each L4 community
    path       depth-limited DFS from the top entity hits, edges ranked by
               their embedding's cosine to the sub-query
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from app.schemas.common import id_sort_key
from app.schemas.graph import Triple
from app.schemas.retrieval import Hit, Route, RouteResult, SubQuery
from app.services.embeddings.index import IndexKind, VectorIndex
from app.services.graph.store import Graph
from app.services.knowledge_tree.builder import KnowledgeTree

logger = logging.getLogger(__name__)

EdgeScorer = Callable[[Triple], float]


def _ranked(scores: dict[str, float], top_k: int) -> list[tuple[str, float]]:
    return sorted(scores.items(), key=lambda pair: (-pair[1], id_sort_key(pair[0])))[:top_k]


def _all_scores(index: Optional[VectorIndex], query: np.ndarray) -> dict[str, float]:
    if index is None or len(index) == 0:
        return {}
    return dict(zip(index.keys, index.scores(query).tolist()))


def entity_text(graph: Graph, entity_id: str) -> str:
    entity = graph.entity(entity_id)
    text = f"{entity.name} ({entity.etype})"
    if entity.attributes:
        attrs = "; ".join(f"{k}: {v}" for k, v in sorted(entity.attributes.items()))
        text = f"{text}; {attrs}"
    return text


def entity_scores(query: np.ndarray, tree: KnowledgeTree, graph: Graph) -> dict[str, float]:
    scores = _all_scores(tree.index(IndexKind.ENTITY), query)
    for triple_id, score in _all_scores(tree.index(IndexKind.ATTRIBUTE), query).items():
        head = graph.triple(triple_id).head
        if score > scores.get(head, float("-inf")):
            scores[head] = score
    return scores


def entity_match(
    sub_query: SubQuery, query: np.ndarray, tree: KnowledgeTree, graph: Graph, top_k: int
) -> RouteResult:
    hits = [
        Hit(kind="entity", item_id=eid, score=score, text=entity_text(graph, eid))
        for eid, score in _ranked(entity_scores(query, tree, graph), top_k)
    ]
    return RouteResult(route=Route.ENTITY, sub_query=sub_query.ordinal, hits=hits)


def triple_match(
    sub_query: SubQuery, query: np.ndarray, tree: KnowledgeTree, graph: Graph, top_k: int
) -> RouteResult:
    hits = []
    for tid, score in _ranked(_all_scores(tree.index(IndexKind.TRIPLE), query), top_k):
        triple = graph.triple(tid)
        text = graph.verbalize(triple)
        source = graph.chunks.get(triple.provenance, "")
        if source:
            text = f"{text} [source: {source}]"
        hits.append(Hit(kind="triple", item_id=tid, score=score, text=text))
    return RouteResult(route=Route.TRIPLE, sub_query=sub_query.ordinal, hits=hits)


def community_filter(
    sub_query: SubQuery, query: np.ndarray, tree: KnowledgeTree, graph: Graph, top_k: int
) -> RouteResult:
    keyword_scores = _all_scores(tree.index(IndexKind.KEYWORD), query)
    hits = []
    for key, score in _ranked(_all_scores(tree.index(IndexKind.COMMUNITY), query), top_k):
        community = tree.community(int(key))
        keywords = sorted(
            community.keywords,
            key=lambda eid: (-keyword_scores.get(eid, 0.0), id_sort_key(eid)),
        )
        names = ", ".join(graph.entity(eid).name for eid in keywords if eid in graph.entities)
        text = f"{community.name}: {community.description}"
        if names:
            text = f"{text} (keywords: {names})"
        hits.append(Hit(kind="community", item_id=key, score=score, text=text))
    return RouteResult(route=Route.COMMUNITY, sub_query=sub_query.ordinal, hits=hits)


# ── Path traversal ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class GraphPath:
    entities: tuple[str, ...]
    edges: tuple[Triple, ...]
    score: float = 0.0

    @property
    def length(self) -> int:
        return len(self.edges)

    @property
    def key(self) -> str:
        return "/".join(edge.id for edge in self.edges)


def dfs_traverse(
    seeds: list[str],
    graph: Graph,
    max_depth: int = 5,
    fanout_cap: int = 8,
    score_edge: Optional[EdgeScorer] = None,
    max_paths: int = 200,
) -> list[GraphPath]:
    """
    Maximal simple paths from each seed: a path is emitted once it reaches
    max_depth edges or no unvisited neighbor remains. Entity-relation and
    member_of edges are followed in both directions; has_attribute edges never
    are. At each node only the fanout_cap best-scoring edges (ties to the
    lower edge id) are expanded. A path and its reverse are reported once.
    """
    if max_depth < 1 or fanout_cap < 1:
        raise ValueError("max_depth and fanout_cap must be >= 1")
    scorer = score_edge or (lambda triple: 0.0)
    edge_scores: dict[str, float] = {}

    def score(triple: Triple) -> float:
        if triple.id not in edge_scores:
            edge_scores[triple.id] = scorer(triple)
        return edge_scores[triple.id]

    paths: list[GraphPath] = []
    seen: set[tuple[str, ...]] = set()

    def emit(entities: list[str], edges: list[Triple]) -> None:
        ids = tuple(edge.id for edge in edges)
        if ids in seen or tuple(reversed(ids)) in seen:
            return
        seen.add(ids)
        mean = sum(score(edge) for edge in edges) / len(edges)
        paths.append(GraphPath(tuple(entities), tuple(edges), mean))

    def extend(entities: list[str], edges: list[Triple]) -> None:
        if len(paths) >= max_paths:
            return
        options = []
        if len(edges) < max_depth:
            visited = set(entities)
            options = [
                (triple, other)
                for triple, other in graph.neighbors(entities[-1], include_attributes=False)
                if other not in visited
            ]
            options.sort(key=lambda pair: (-score(pair[0]), id_sort_key(pair[0].id)))
            options = options[:fanout_cap]
        if not options:
            if edges:
                emit(entities, edges)
            return
        for triple, other in options:
            extend(entities + [other], edges + [triple])

    for seed in seeds:
        if seed in graph.entities:
            extend([seed], [])
    return paths


def describe_path(path: GraphPath, graph: Graph) -> str:
    parts = [graph.entity(path.entities[0]).name]
    for edge, (src, dst) in zip(path.edges, zip(path.entities, path.entities[1:])):
        arrow = f"--{edge.relation}-->" if edge.head == src else f"<--{edge.relation}--"
        parts.append(f"{arrow} {graph.entity(dst).name}")
    return " ".join(parts)


def path_traverse(
    sub_query: SubQuery,
    query: np.ndarray,
    tree: KnowledgeTree,
    graph: Graph,
    top_k: int,
    max_depth: int = 5,
    fanout_cap: int = 8,
    seed_count: int = 3,
    max_paths: int = 200,
) -> RouteResult:
    seeds = [eid for eid, _ in _ranked(entity_scores(query, tree, graph), seed_count)]
    edge_scores = _all_scores(tree.index(IndexKind.EDGE), query)
    paths = dfs_traverse(
        seeds,
        graph,
        max_depth=max_depth,
        fanout_cap=fanout_cap,
        score_edge=lambda triple: edge_scores.get(triple.id, 0.0),
        max_paths=max_paths,
    )
    ranked = sorted(paths, key=lambda p: (-p.score, p.key))[:top_k]
    hits = [
        Hit(kind="path", item_id=path.key, score=path.score, text=describe_path(path, graph))
        for path in ranked
    ]
    return RouteResult(route=Route.PATH, sub_query=sub_query.ordinal, hits=hits)
