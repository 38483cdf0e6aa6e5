"""
Graph store: typed in-memory property graph.

Design rules enforced here:
  - Ids are monotonically assigned integers rendered as strings, one counter
    for entities and one for triples. Identical insertion order → identical ids.
  - Entity mentions merge on trim + case-fold of the surface name; the first
    declared etype wins.
  - A triple is identified by (head, relation, tail, provenance); re-inserting
    the same quadruple returns the existing id.
  - Attribute values are shared nodes of the reserved etype "attribute", one
    per (key, value); the owning entity also records the value in its
    attribute map.
  - All writes take the store lock, so a commit() batch is applied atomically
    with respect to other writers. Reads take no lock.
  - There is no deletion API. strip_community_structure() exists only so the
    knowledge tree can rebuild itself in place.
"""

import logging
import threading
from collections import Counter
from typing import Iterable, Optional

from app.schemas.common import id_sort_key
from app.schemas.extraction import GraphBatch
from app.schemas.graph import (
    ATTRIBUTE_ETYPE,
    COMMUNITY_ETYPE,
    HAS_ATTRIBUTE,
    MEMBER_OF,
    RESERVED_ETYPES,
    RESERVED_RELATIONS,
    EntityRecord,
    Triple,
    TripleKind,
    classify_relation,
)
from app.schemas.graph_schema import Schema

logger = logging.getLogger(__name__)


class GraphError(Exception):
    """Base class for graph store failures."""


class EntityNotFoundError(GraphError, KeyError):
    def __init__(self, entity_id: str):
        super().__init__(f"Entity {entity_id!r} not found")
        self.entity_id = entity_id

    def __str__(self) -> str:
        return self.args[0]


class DanglingEndpointError(GraphError):
    """Raised when a triple names an endpoint that does not exist."""


class SchemaViolationError(GraphError):
    """Raised in strict mode when a label is not in the schema."""


class IntegrityError(GraphError):
    """Raised when referential integrity fails after a mutation batch."""


def canonical_name(name: str) -> str:
    return " ".join(name.split()).casefold()


def _attribute_node_key(key: str, value: str) -> str:
    return f"attr::{key}::{canonical_name(value)}"


class Graph:
    def __init__(self, schema: Optional[Schema] = None, strict: bool = False):
        if strict and schema is None:
            raise ValueError("strict mode needs a schema")
        self.schema = schema
        self.strict = strict
        self.entities: dict[str, EntityRecord] = {}
        self.triples: dict[str, Triple] = {}
        self.chunks: dict[str, str] = {}
        self._entity_keys: dict[str, str] = {}
        self._triple_keys: dict[tuple[str, str, str, str], str] = {}
        self._incident: dict[str, list[str]] = {}
        self._next_entity = 1
        self._next_triple = 1
        self._lock = threading.RLock()

    # ── Reads ─────────────────────────────────────────────────────────────────

    def __len__(self) -> int:
        return len(self.entities)

    def __eq__(self, other: object) -> bool:
        """Structural equality: entities, triples, chunks and ids."""
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.entities == other.entities
            and self.triples == other.triples
            and self.chunks == other.chunks
        )

    @property
    def is_empty(self) -> bool:
        return not self.entities

    def entity(self, entity_id: str) -> EntityRecord:
        try:
            return self.entities[entity_id]
        except KeyError:
            raise EntityNotFoundError(entity_id) from None

    def triple(self, triple_id: str) -> Triple:
        try:
            return self.triples[triple_id]
        except KeyError:
            raise GraphError(f"Triple {triple_id!r} not found") from None

    def find_entity(self, name: str) -> Optional[str]:
        return self._entity_keys.get(canonical_name(name))

    def entity_ids(self) -> list[str]:
        return sorted(self.entities, key=id_sort_key)

    def clusterable_entities(self) -> list[str]:
        """Every entity except community nodes, in id order."""
        return [
            eid for eid in self.entity_ids() if not self.entities[eid].is_community_node
        ]

    def community_nodes(self) -> list[str]:
        return [eid for eid in self.entity_ids() if self.entities[eid].is_community_node]

    def triples_of_kind(self, kind: TripleKind) -> list[Triple]:
        return [
            self.triples[tid]
            for tid in sorted(self.triples, key=id_sort_key)
            if self.triples[tid].kind == kind
        ]

    def incident_triples(self, entity_id: str, include_member_of: bool = False) -> list[Triple]:
        """Triples touching the entity in either direction, in id order."""
        self.entity(entity_id)
        triples = [self.triples[tid] for tid in self._incident.get(entity_id, [])]
        if not include_member_of:
            triples = [t for t in triples if t.kind != TripleKind.MEMBER_OF]
        return sorted(triples, key=lambda t: id_sort_key(t.id))

    def incident_relations(
        self, entity_id: str, include_attributes: bool = True
    ) -> Counter:
        """
        Multiset of relation labels over incident triples, one occurrence per
        triple. member_of edges never count; has_attribute edges count unless
        include_attributes is False. A self-loop counts once.
        """
        counts: Counter = Counter()
        for triple in self.incident_triples(entity_id):
            if not include_attributes and triple.kind == TripleKind.ATTRIBUTE:
                continue
            counts[triple.relation] += 1
        return counts

    def neighbors(
        self, entity_id: str, include_member_of: bool = True, include_attributes: bool = True
    ) -> list[tuple[Triple, str]]:
        """(edge, other endpoint) pairs in both directions, in edge id order."""
        result = []
        for triple in self.incident_triples(entity_id, include_member_of=include_member_of):
            if not include_attributes and triple.kind == TripleKind.ATTRIBUTE:
                continue
            other = triple.tail if triple.head == entity_id else triple.head
            result.append((triple, other))
        return result

    def attribute_key(self, triple: Triple) -> str:
        """The attribute type carried by a has_attribute triple."""
        if triple.kind != TripleKind.ATTRIBUTE:
            raise GraphError(f"Triple {triple.id} is not an attribute triple")
        (key,) = self.entity(triple.tail).attributes.keys()
        return key

    def verbalize(self, triple: Triple) -> str:
        """'head relation tail' with surface names; attributes read 'head key value'."""
        head = self.entity(triple.head).name
        tail = self.entity(triple.tail).name
        if triple.kind == TripleKind.ATTRIBUTE:
            return f"{head} {self.attribute_key(triple)} {tail}"
        return f"{head} {triple.relation} {tail}"

    # ── Writes ────────────────────────────────────────────────────────────────

    def _insert_entity(self, record: EntityRecord, key: Optional[str]) -> str:
        self.entities[record.id] = record
        self._incident.setdefault(record.id, [])
        if key is not None:
            self._entity_keys[key] = record.id
        return record.id

    def _new_entity_id(self) -> str:
        entity_id = str(self._next_entity)
        self._next_entity += 1
        return entity_id

    def upsert_entity(self, name: str, etype: str) -> str:
        """Return the id of the entity with this surface name, creating it if new."""
        name = " ".join(name.split())
        if not name or not etype:
            raise GraphError("Entity name and etype must be nonempty")
        if etype in RESERVED_ETYPES:
            raise GraphError(f"etype {etype!r} is reserved")
        if self.strict and etype not in self.schema.entity_types:
            raise SchemaViolationError(f"Unknown entity type {etype!r}")
        key = canonical_name(name)
        with self._lock:
            existing = self._entity_keys.get(key)
            if existing is not None:
                return existing
            record = EntityRecord(id=self._new_entity_id(), name=name, etype=etype)
            return self._insert_entity(record, key)

    def add_chunk(self, chunk_id: str, text: str) -> None:
        with self._lock:
            self.chunks[chunk_id] = text

    def add_triple(
        self, head: str, relation: str, tail: str, provenance: str = ""
    ) -> str:
        """Insert (head, relation, tail) between existing entity ids."""
        with self._lock:
            for endpoint in (head, tail):
                if endpoint not in self.entities:
                    raise DanglingEndpointError(
                        f"Triple ({head}, {relation}, {tail}) references missing entity {endpoint!r}"
                    )
            if (
                self.strict
                and relation not in RESERVED_RELATIONS
                and relation not in self.schema.relation_types
            ):
                raise SchemaViolationError(f"Unknown relation type {relation!r}")

            dedupe = (head, relation, tail, provenance)
            existing = self._triple_keys.get(dedupe)
            if existing is not None:
                return existing

            triple = Triple(
                id=str(self._next_triple),
                head=head,
                relation=relation,
                tail=tail,
                provenance=provenance,
                kind=classify_relation(relation),
            )
            self._next_triple += 1
            self._insert_triple(triple)
            return triple.id

    def _insert_triple(self, triple: Triple) -> None:
        self.triples[triple.id] = triple
        self._triple_keys[triple.dedupe_key] = triple.id
        self._incident[triple.head].append(triple.id)
        if triple.tail != triple.head:
            self._incident[triple.tail].append(triple.id)

    def add_fact(
        self,
        head: str,
        head_type: str,
        relation: str,
        tail: str,
        tail_type: str,
        provenance: str = "",
    ) -> str:
        """add_triple by surface names, creating endpoints on the fly."""
        with self._lock:
            head_id = self.upsert_entity(head, head_type)
            tail_id = self.upsert_entity(tail, tail_type)
            return self.add_triple(head_id, relation, tail_id, provenance)

    def add_attribute(
        self, entity_id: str, key: str, value: str, provenance: str = ""
    ) -> str:
        """Attach key=value to the entity through a shared attribute-value node."""
        value = " ".join(value.split())
        if not key or not value:
            raise GraphError("Attribute key and value must be nonempty")
        if self.strict and key not in self.schema.attribute_types:
            raise SchemaViolationError(f"Unknown attribute type {key!r}")
        with self._lock:
            owner = self.entity(entity_id)
            node_key = _attribute_node_key(key, value)
            node_id = self._entity_keys.get(node_key)
            if node_id is None:
                record = EntityRecord(
                    id=self._new_entity_id(),
                    name=value,
                    etype=ATTRIBUTE_ETYPE,
                    attributes={key: value},
                )
                node_id = self._insert_entity(record, node_key)
            owner.attributes[key] = value
            return self.add_triple(entity_id, HAS_ATTRIBUTE, node_id, provenance)

    def add_community_node(self, name: str, member_ids: Iterable[str]) -> str:
        """Insert a community node and a member_of edge from each member."""
        with self._lock:
            record = EntityRecord(
                id=self._new_entity_id(),
                name=name,
                etype=COMMUNITY_ETYPE,
                is_community_node=True,
            )
            node_id = self._insert_entity(record, None)
            for member in sorted(member_ids, key=id_sort_key):
                self.add_triple(member, MEMBER_OF, node_id, "")
            return node_id

    def commit(self, batch: GraphBatch) -> list[str]:
        """
        Merge one batch of extracted facts serially, then check integrity.
        Returns the triple ids in batch order (attribute triples last).
        """
        with self._lock:
            for chunk_id, text in batch.chunks.items():
                self.add_chunk(chunk_id, text)
            ids = [
                self.add_fact(
                    fact.head, fact.head_type, fact.relation,
                    fact.tail, fact.tail_type, chunk_id,
                )
                for chunk_id, fact in batch.triples
            ]
            for chunk_id, attr in batch.attributes:
                owner = self.upsert_entity(attr.entity, attr.entity_type)
                ids.append(self.add_attribute(owner, attr.key, attr.value, chunk_id))
            self.check_integrity()
        return ids

    def check_integrity(self) -> None:
        for triple in self.triples.values():
            for endpoint in (triple.head, triple.tail):
                if endpoint not in self.entities:
                    raise IntegrityError(
                        f"Triple {triple.id} has dangling endpoint {endpoint!r}"
                    )
            if triple.provenance and triple.provenance not in self.chunks:
                raise IntegrityError(
                    f"Triple {triple.id} cites unknown chunk {triple.provenance!r}"
                )

    def strip_community_structure(self) -> int:
        """
        Remove community nodes and member_of edges, then rewind both id
        counters so a rebuild reassigns the same ids. Returns the number of
        community nodes removed.
        """
        with self._lock:
            removed = [eid for eid in self.entities if self.entities[eid].is_community_node]
            if not removed:
                return 0
            for eid in removed:
                del self.entities[eid]
            self.triples = {
                tid: t for tid, t in self.triples.items() if t.kind != TripleKind.MEMBER_OF
            }
            self.reindex()
            logger.info("Stripped %d community nodes", len(removed))
            return len(removed)

    def reindex(self) -> None:
        """Rebuild lookup tables and counters from entities/triples/chunks."""
        with self._lock:
            self._entity_keys = {}
            self._triple_keys = {}
            self._incident = {eid: [] for eid in self.entities}
            for eid in self.entity_ids():
                record = self.entities[eid]
                if record.is_community_node:
                    continue
                if record.is_attribute_value:
                    key, value = next(iter(record.attributes.items()))
                    self._entity_keys[_attribute_node_key(key, value)] = eid
                else:
                    self._entity_keys[canonical_name(record.name)] = eid
            for tid in sorted(self.triples, key=id_sort_key):
                triple = self.triples[tid]
                for endpoint in (triple.head, triple.tail):
                    if endpoint not in self.entities:
                        raise IntegrityError(
                            f"Triple {tid} has dangling endpoint {endpoint!r}"
                        )
                self._insert_triple(triple)
            self._next_entity = _next_counter(self.entities)
            self._next_triple = _next_counter(self.triples)


def _next_counter(ids: Iterable[str]) -> int:
    numeric = [int(i) for i in ids if i.isdigit()]
    return max(numeric, default=0) + 1
