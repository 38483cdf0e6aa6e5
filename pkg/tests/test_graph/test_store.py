"""
Graph store tests: ids, canonicalization, attribute nodes, integrity and
community-structure stripping.
"""

import pytest

from app.schemas.extraction import ExtractedAttribute, ExtractedTriple, GraphBatch
from app.schemas.graph import ATTRIBUTE_ETYPE, HAS_ATTRIBUTE, MEMBER_OF, TripleKind
from app.services.graph.store import (
    DanglingEndpointError,
    EntityNotFoundError,
    Graph,
    GraphError,
    IntegrityError,
    SchemaViolationError,
    canonical_name,
)


class TestEntities:
    def test_ids_are_monotonic_strings(self):
        graph = Graph()
        assert graph.upsert_entity("Aspirin", "Drug") == "1"
        assert graph.upsert_entity("Fever", "Disease") == "2"

    @pytest.mark.parametrize("variant", ["aspirin", "  ASPIRIN ", "Aspirin"])
    def test_mentions_merge_on_trim_and_casefold(self, variant):
        graph = Graph()
        first = graph.upsert_entity("Aspirin", "Drug")
        assert graph.upsert_entity(variant, "Drug") == first
        assert len(graph) == 1

    def test_first_etype_wins(self):
        graph = Graph()
        eid = graph.upsert_entity("Mercury", "Planet")
        graph.upsert_entity("mercury", "Element")
        assert graph.entity(eid).etype == "Planet"

    def test_reserved_etype_rejected(self):
        with pytest.raises(GraphError):
            Graph().upsert_entity("x", "community")

    def test_missing_entity_raises_not_found(self):
        with pytest.raises(EntityNotFoundError) as exc_info:
            Graph().entity("99")
        assert isinstance(exc_info.value, KeyError)

    def test_canonical_name_collapses_whitespace(self):
        assert canonical_name("  St.   Mary ") == "st. mary"

    def test_strict_mode_checks_entity_type(self, medical_schema):
        graph = Graph(schema=medical_schema, strict=True)
        with pytest.raises(SchemaViolationError):
            graph.upsert_entity("Paris", "City")


class TestTriples:
    def test_dangling_endpoint_rejected(self):
        graph = Graph()
        head = graph.upsert_entity("Aspirin", "Drug")
        with pytest.raises(DanglingEndpointError):
            graph.add_triple(head, "treats", "42")

    def test_same_quadruple_is_idempotent(self):
        graph = Graph()
        graph.add_chunk("c1", "text")
        first = graph.add_fact("Aspirin", "Drug", "treats", "Fever", "Disease", "c1")
        again = graph.add_fact("aspirin", "Drug", "treats", "fever", "Disease", "c1")
        assert first == again
        assert len(graph.triples) == 1

    def test_same_fact_from_two_chunks_is_two_triples(self):
        graph = Graph()
        graph.add_chunk("c1", "a")
        graph.add_chunk("c2", "b")
        graph.add_fact("Aspirin", "Drug", "treats", "Fever", "Disease", "c1")
        graph.add_fact("Aspirin", "Drug", "treats", "Fever", "Disease", "c2")
        assert len(graph.triples) == 2

    def test_kind_follows_reserved_relation(self, medical_graph):
        kinds = {t.relation: t.kind for t in medical_graph.triples.values()}
        assert kinds["treats"] == TripleKind.ENTITY_RELATION
        assert kinds[HAS_ATTRIBUTE] == TripleKind.ATTRIBUTE

    def test_strict_mode_checks_relation(self, medical_schema):
        graph = Graph(schema=medical_schema, strict=True)
        a = graph.upsert_entity("Aspirin", "Drug")
        b = graph.upsert_entity("Fever", "Disease")
        with pytest.raises(SchemaViolationError):
            graph.add_triple(a, "causes", b)

    def test_verbalize(self, medical_graph):
        verbalized = sorted(medical_graph.verbalize(t) for t in medical_graph.triples.values())
        assert "Aspirin treats Fever" in verbalized
        assert "Dr. Lee occupation cardiologist" in verbalized

    def test_incident_relations_counts_each_triple_once(self, medical_graph):
        lee = medical_graph.find_entity("Dr. Lee")
        counts = medical_graph.incident_relations(lee)
        assert counts == {"works_at": 1, "prescribes": 1, HAS_ATTRIBUTE: 1}
        assert HAS_ATTRIBUTE not in medical_graph.incident_relations(lee, include_attributes=False)

    def test_neighbors_go_both_ways(self, medical_graph):
        aspirin = medical_graph.find_entity("Aspirin")
        others = {medical_graph.entity(o).name for _, o in medical_graph.neighbors(aspirin)}
        assert others == {"Fever", "Dr. Lee"}


class TestAttributes:
    def test_attribute_value_node_is_shared(self):
        graph = Graph()
        a = graph.upsert_entity("Dr. Lee", "Person")
        b = graph.upsert_entity("Dr. Kim", "Person")
        t1 = graph.add_attribute(a, "occupation", "cardiologist")
        t2 = graph.add_attribute(b, "occupation", "Cardiologist")
        assert graph.triple(t1).tail == graph.triple(t2).tail
        node = graph.entity(graph.triple(t1).tail)
        assert node.etype == ATTRIBUTE_ETYPE
        assert node.is_attribute_value

    def test_owner_records_value(self, medical_graph):
        lee = medical_graph.entity(medical_graph.find_entity("Dr. Lee"))
        assert lee.attributes == {"occupation": "cardiologist"}

    def test_attribute_key(self, medical_graph):
        (triple,) = medical_graph.triples_of_kind(TripleKind.ATTRIBUTE)
        assert medical_graph.attribute_key(triple) == "occupation"

    def test_attribute_key_on_plain_triple_raises(self, medical_graph):
        (triple, *_) = medical_graph.triples_of_kind(TripleKind.ENTITY_RELATION)
        with pytest.raises(GraphError):
            medical_graph.attribute_key(triple)


class TestCommitAndIntegrity:
    def _batch(self) -> GraphBatch:
        batch = GraphBatch()
        batch.chunks["d:0"] = "Aspirin treats fever."
        batch.triples.append(
            ("d:0", ExtractedTriple(head="Aspirin", head_type="Drug", relation="treats", tail="Fever", tail_type="Disease"))
        )
        batch.attributes.append(
            ("d:0", ExtractedAttribute(entity="Aspirin", entity_type="Drug", key="dosage", value="500 mg"))
        )
        return batch

    def test_commit_returns_ids_in_batch_order(self):
        graph = Graph()
        ids = graph.commit(self._batch())
        assert [graph.triple(t).relation for t in ids] == ["treats", HAS_ATTRIBUTE]

    def test_commit_is_deterministic(self):
        a, b = Graph(), Graph()
        a.commit(self._batch())
        b.commit(self._batch())
        assert a == b

    def test_unknown_provenance_fails_integrity(self):
        graph = Graph()
        graph.add_fact("Aspirin", "Drug", "treats", "Fever", "Disease", "missing:0")
        with pytest.raises(IntegrityError):
            graph.check_integrity()


class TestCommunityStructure:
    def test_add_community_node_links_members(self, medical_graph):
        members = [medical_graph.find_entity("Aspirin"), medical_graph.find_entity("Fever")]
        node = medical_graph.add_community_node("Fever drugs", members)
        member_edges = medical_graph.triples_of_kind(TripleKind.MEMBER_OF)
        assert {t.head for t in member_edges} == set(members)
        assert all(t.tail == node and t.relation == MEMBER_OF for t in member_edges)
        assert node not in medical_graph.clusterable_entities()

    def test_member_of_is_not_a_relation_for_scoring(self, medical_graph):
        aspirin = medical_graph.find_entity("Aspirin")
        before = medical_graph.incident_relations(aspirin)
        medical_graph.add_community_node("c", [aspirin])
        assert medical_graph.incident_relations(aspirin) == before

    def test_strip_restores_graph_and_counters(self, medical_graph):
        snapshot_entities = dict(medical_graph.entities)
        snapshot_triples = dict(medical_graph.triples)
        first = medical_graph.add_community_node("c", medical_graph.clusterable_entities())
        assert medical_graph.strip_community_structure() == 1
        assert medical_graph.entities == snapshot_entities
        assert medical_graph.triples == snapshot_triples
        assert medical_graph.add_community_node("c", medical_graph.clusterable_entities()) == first

    def test_strip_without_structure_is_noop(self, medical_graph):
        assert medical_graph.strip_community_structure() == 0
