"""
Test fixtures and shared setup.

Everything runs offline: generation goes through ScriptedGenerationProvider
fixtures and embeddings through the seeded ScriptedEmbeddingProvider, so no
test needs credentials or network access.
"""

import os
from dataclasses import dataclass

import pytest

# ── Override settings BEFORE importing app modules ────────────────────────────
os.environ.setdefault("LOG_LEVEL", "WARNING")
os.environ["ANTHROPIC_API_KEY"] = ""
os.environ["SCRIPTED_FIXTURES_DIR"] = ""

from app.schemas.community import DetectionParams
from app.schemas.graph_schema import Schema
from app.services.community.detector import detect_communities
from app.services.embeddings.vectors import EmbeddingCache
from app.services.graph.store import Graph
from app.services.knowledge_tree.builder import KnowledgeTree, build_tree
from app.services.providers.scripted import ScriptedEmbeddingProvider, ScriptedGenerationProvider

EMBEDDING_DIM = 8


def tsv(*fields) -> str:
    """One extraction reply line."""
    return "\t".join(str(f) for f in fields)


def reply(*lines: str) -> str:
    return "\n".join(lines)


@pytest.fixture
def medical_schema() -> Schema:
    return Schema(
        entity_types=frozenset({"Drug", "Disease", "Person", "Hospital"}),
        relation_types=frozenset({"treats", "works_at", "prescribes"}),
        attribute_types=frozenset({"occupation", "dosage"}),
    )


@pytest.fixture
def generation() -> ScriptedGenerationProvider:
    return ScriptedGenerationProvider()


@pytest.fixture
def embedding() -> ScriptedEmbeddingProvider:
    return ScriptedEmbeddingProvider(dimension=EMBEDDING_DIM, seed=42)


@pytest.fixture
def medical_graph(medical_schema) -> Graph:
    """
    Two loose topics: fever drugs and a hospital's staff.

        Aspirin  -treats->  Fever        Dr. Lee  -works_at->  St. Mary
        Ibuprofen -treats-> Fever        Dr. Lee  -prescribes-> Aspirin
        Dr. Lee occupation=cardiologist
    """
    graph = Graph(schema=medical_schema)
    graph.add_chunk("doc1:0", "Aspirin treats fever. Ibuprofen treats fever too.")
    graph.add_chunk("doc2:0", "Dr. Lee, a cardiologist, works at St. Mary and prescribes aspirin.")
    graph.add_fact("Aspirin", "Drug", "treats", "Fever", "Disease", "doc1:0")
    graph.add_fact("Ibuprofen", "Drug", "treats", "Fever", "Disease", "doc1:0")
    graph.add_fact("Dr. Lee", "Person", "works_at", "St. Mary", "Hospital", "doc2:0")
    graph.add_fact("Dr. Lee", "Person", "prescribes", "Aspirin", "Drug", "doc2:0")
    graph.add_attribute(graph.find_entity("Dr. Lee"), "occupation", "cardiologist", "doc2:0")
    return graph


@dataclass
class KnowledgeBase:
    graph: Graph
    tree: KnowledgeTree
    schema: Schema
    generation: ScriptedGenerationProvider
    embedding: ScriptedEmbeddingProvider


@pytest.fixture
def knowledge_base(medical_graph, medical_schema, generation, embedding) -> KnowledgeBase:
    """medical_graph clustered and indexed; summaries come from a template-wide default."""
    generation.register("summarize_community", "Name: Medical group\nDescription: Related medical entities.")
    params = DetectionParams(seed=42)
    cache = EmbeddingCache(embedding)
    communities = detect_communities(medical_graph, cache, params)
    tree, _ = build_tree(medical_graph, communities, generation, cache, params)
    return KnowledgeBase(medical_graph, tree, medical_schema, generation, embedding)
