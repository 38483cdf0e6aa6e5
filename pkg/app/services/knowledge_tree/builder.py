"""
Knowledge tree: the four-level index over a clustered graph.

    L4  communities (name, description, center, members)
    L3  keywords: the top-m members of each community by φ
    L2  entity-relation triples
    L1  attribute triples (entity → typed value)

build_tree() adds structure above L1/L2 and never edits them: it strips any
previous community nodes, inserts one community node per community with a
member_of edge from every member, and builds the embedding indexes the
retrieval routes search:

    entity     entity names (attribute-value nodes excluded)
    triple     L2 triples verbalized as "head relation tail"
    attribute  L1 entries as "entity key"
    community  "name: description"
    keyword    keyword entity names
    edge       every triple, member_of included (DFS edge ranking)
    representation  3d structure-aware entity representations

Summaries are generated in parallel; graph writes happen serially afterwards
in community order.
"""

import logging
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from app.schemas.common import id_sort_key
from app.schemas.community import Community, DetectionParams
from app.schemas.cost import ZERO_COST, CostReport, GenerationRequest, MergeMode, sum_costs
from app.schemas.graph import TripleKind
from app.services.community.scoring import ScoringContext
from app.services.embeddings.index import IndexKind, VectorIndex
from app.services.embeddings.representation import entity_representations
from app.services.embeddings.vectors import EmbeddingCache
from app.services.graph.store import Graph
from app.services.providers.base import GenerationProvider
from app.workers.pool import run_ordered, unwrap_all

logger = logging.getLogger(__name__)

_NAME_RE = re.compile(r"^\s*name\s*:\s*(.*)$", re.IGNORECASE)
_DESCRIPTION_RE = re.compile(r"^\s*description\s*:\s*(.*)$", re.IGNORECASE)


class SummarizationError(Exception):
    """Raised when the provider's community summary is empty or nameless."""


@dataclass
class KnowledgeTree:
    communities: list[Community]
    level2: list[str]  # entity-relation triple ids
    level1: dict[str, list[str]]  # entity id → attribute triple ids
    indexes: dict[IndexKind, VectorIndex] = field(default_factory=dict)

    @property
    def keywords(self) -> dict[int, list[str]]:
        return {c.index: list(c.keywords) for c in self.communities}

    def membership(self) -> dict[str, int]:
        return {eid: c.index for c in self.communities for eid in c.members}

    def community(self, index: int) -> Community:
        return self.communities[index]

    def index(self, kind: IndexKind) -> Optional[VectorIndex]:
        return self.indexes.get(kind)


def member_names(community: Community, graph: Graph) -> str:
    names = sorted({graph.entity(eid).name for eid in community.members}, key=lambda n: (n.casefold(), n))
    return ", ".join(names)


def parse_summary(text: str) -> tuple[str, str]:
    lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
    name, description = "", ""
    for line in lines:
        if not name and (match := _NAME_RE.match(line)):
            name = match.group(1).strip()
        elif not description and (match := _DESCRIPTION_RE.match(line)):
            description = match.group(1).strip()
    if not name and lines and not _DESCRIPTION_RE.match(lines[0]):
        # free-form reply: first line is the name
        name = lines[0]
        description = description or " ".join(lines[1:])
    return name, description


def summarize_community(
    community: Community, graph: Graph, provider: GenerationProvider
) -> tuple[str, str, CostReport]:
    generation = provider.generate(
        GenerationRequest(
            template_id="summarize_community",
            variables={"members": member_names(community, graph)},
        )
    )
    if not generation.text.strip():
        raise SummarizationError(f"Empty summary for community {community.index}")
    name, description = parse_summary(generation.text)
    if not name:
        raise SummarizationError(f"Summary for community {community.index} has no name")
    return name, description, generation.cost


def select_keywords(community: Community, context: ScoringContext, group: int, m: int) -> list[str]:
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    return [eid for eid, _ in context.ranked_members(group)[:m]]


# ── Index construction ─────────────────────────────────────────────────────────


def _text_index(kind: IndexKind, items: list[tuple[str, str]], cache: EmbeddingCache) -> VectorIndex:
    cache.prime(text for _, text in items)
    return VectorIndex.build(kind, [(key, cache.get(text)) for key, text in items], cache.dimension)


def build_indexes(
    graph: Graph,
    communities: list[Community],
    cache: EmbeddingCache,
    representations: dict[str, np.ndarray],
) -> dict[IndexKind, VectorIndex]:
    triples = [graph.triples[tid] for tid in sorted(graph.triples, key=id_sort_key)]
    entity_items = [
        (eid, graph.entity(eid).name)
        for eid in graph.clusterable_entities()
        if not graph.entity(eid).is_attribute_value
    ]
    attribute_items = [
        (t.id, f"{graph.entity(t.head).name} {graph.attribute_key(t)}")
        for t in triples
        if t.kind == TripleKind.ATTRIBUTE
    ]
    keyword_items = [
        (eid, graph.entity(eid).name) for c in communities for eid in c.keywords
    ]

    # one provider call for every text the indexes need
    cache.prime(
        [text for _, text in entity_items]
        + [graph.verbalize(t) for t in triples]
        + [text for _, text in attribute_items]
        + [c.summary_text() for c in communities]
    )
    indexes = {
        IndexKind.ENTITY: _text_index(IndexKind.ENTITY, entity_items, cache),
        IndexKind.TRIPLE: _text_index(
            IndexKind.TRIPLE,
            [(t.id, graph.verbalize(t)) for t in triples if t.kind == TripleKind.ENTITY_RELATION],
            cache,
        ),
        IndexKind.ATTRIBUTE: _text_index(IndexKind.ATTRIBUTE, attribute_items, cache),
        IndexKind.COMMUNITY: _text_index(
            IndexKind.COMMUNITY, [(str(c.index), c.summary_text()) for c in communities], cache
        ),
        IndexKind.KEYWORD: _text_index(IndexKind.KEYWORD, keyword_items, cache),
        IndexKind.EDGE: _text_index(IndexKind.EDGE, [(t.id, graph.verbalize(t)) for t in triples], cache),
    }
    rep_ids = sorted(representations, key=id_sort_key)
    indexes[IndexKind.REPRESENTATION] = VectorIndex.build(
        IndexKind.REPRESENTATION,
        [(eid, representations[eid]) for eid in rep_ids],
        3 * cache.dimension,
    )
    return indexes


def tree_levels(graph: Graph) -> tuple[list[str], dict[str, list[str]]]:
    level2 = [t.id for t in graph.triples_of_kind(TripleKind.ENTITY_RELATION)]
    level1: dict[str, list[str]] = {}
    for triple in graph.triples_of_kind(TripleKind.ATTRIBUTE):
        level1.setdefault(triple.head, []).append(triple.id)
    return level2, level1


# ── Build ─────────────────────────────────────────────────────────────────────


def build_tree(
    graph: Graph,
    communities: list[Community],
    provider: GenerationProvider,
    cache: EmbeddingCache,
    params: DetectionParams,
    workers: int = 1,
) -> tuple[KnowledgeTree, CostReport]:
    """Summarize, pick keywords, insert community structure, index. Mutates graph."""
    graph.strip_community_structure()

    outcomes = run_ordered(
        lambda community: summarize_community(community, graph, provider),
        communities,
        workers=workers,
        label="summarize",
    )
    summaries = unwrap_all(outcomes)
    cost = sum_costs([s[2] for s in summaries], MergeMode.PARALLEL) if summaries else ZERO_COST

    representations = {
        eid: rep.vector for eid, rep in entity_representations(graph, cache).items()
    }
    groups = [c.members for c in communities]
    context = ScoringContext(graph, representations, params, groups)

    built: list[Community] = []
    for position, (community, (name, description, _)) in enumerate(zip(communities, summaries)):
        keywords = select_keywords(community, context, position, params.keywords_per_community)
        node_id = graph.add_community_node(name, community.members)
        built.append(
            community.model_copy(
                update={
                    "name": name,
                    "description": description,
                    "keywords": keywords,
                    "center": keywords[0],
                    "node_id": node_id,
                }
            )
        )
    graph.check_integrity()

    level2, level1 = tree_levels(graph)
    indexes = build_indexes(graph, built, cache, representations)
    logger.info(
        "Knowledge tree built: %d communities, %d L2 triples, %d entities with attributes",
        len(built),
        len(level2),
        len(level1),
    )
    return KnowledgeTree(communities=built, level2=level2, level1=level1, indexes=indexes), cost
