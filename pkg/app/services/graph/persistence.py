"""
Graph persistence: one JSON record per line.

    {"record": "entity", "id": "1", "name": "Aspirin", "etype": "Drug", ...}
    {"record": "triple", "id": "1", "head": "1", "relation": "treats", ...}
    {"record": "chunk",  "id": "doc1:0", "text": "..."}

Entities, then triples (both in id order), then chunks (sorted by id). Keys
are sorted inside each record, so saving the same graph twice gives
byte-identical files.
"""

import json
import logging
from pathlib import Path
from typing import Any, Optional, Union

from pydantic import ValidationError

from app.schemas.common import id_sort_key
from app.schemas.graph import EntityRecord, Triple
from app.schemas.graph_schema import Schema
from app.services.graph.store import Graph, GraphError

logger = logging.getLogger(__name__)

_RECORD_KINDS = ("entity", "triple", "chunk")


class GraphParseError(GraphError):
    """Raised when a persisted graph line cannot be parsed."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def dump_line(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


def graph_records(graph: Graph) -> list[dict[str, Any]]:
    records: list[dict[str, Any]] = []
    for eid in graph.entity_ids():
        records.append({"record": "entity", **graph.entities[eid].model_dump()})
    for tid in sorted(graph.triples, key=id_sort_key):
        records.append({"record": "triple", **graph.triples[tid].model_dump(mode="json")})
    for chunk_id in sorted(graph.chunks):
        records.append({"record": "chunk", "id": chunk_id, "text": graph.chunks[chunk_id]})
    return records


def save_graph(graph: Graph, destination: Union[str, Path]) -> Path:
    path = Path(destination)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in graph_records(graph):
            f.write(dump_line(record) + "\n")
    logger.info(
        "Saved graph to %s (%d entities, %d triples, %d chunks)",
        path,
        len(graph.entities),
        len(graph.triples),
        len(graph.chunks),
    )
    return path


def load_graph(
    source: Union[str, Path], schema: Optional[Schema] = None, strict: bool = False
) -> Graph:
    path = Path(source)
    graph = Graph(schema=schema, strict=strict)
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            _load_record(graph, line, line_no)
    graph.reindex()
    graph.check_integrity()
    logger.info("Loaded graph from %s (%d entities)", path, len(graph.entities))
    return graph


def _load_record(graph: Graph, line: str, line_no: int) -> None:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise GraphParseError(line_no, f"invalid JSON ({exc.msg})") from exc
    if not isinstance(record, dict):
        raise GraphParseError(line_no, "record must be a JSON object")

    kind = record.pop("record", None)
    if kind not in _RECORD_KINDS:
        raise GraphParseError(line_no, f"unknown record kind {kind!r}")

    try:
        if kind == "entity":
            entity = EntityRecord.model_validate(record)
            _reject_duplicate(graph.entities, entity.id, line_no)
            graph.entities[entity.id] = entity
        elif kind == "triple":
            triple = Triple.model_validate(record)
            _reject_duplicate(graph.triples, triple.id, line_no)
            graph.triples[triple.id] = triple
        else:
            graph.chunks[str(record["id"])] = str(record["text"])
    except ValidationError as exc:
        raise GraphParseError(line_no, f"invalid {kind} record: {exc}") from exc
    except KeyError as exc:
        raise GraphParseError(line_no, f"{kind} record missing field {exc}") from exc


def _reject_duplicate(existing: dict, record_id: str, line_no: int) -> None:
    if record_id in existing:
        raise GraphParseError(line_no, f"duplicate id {record_id!r}")
