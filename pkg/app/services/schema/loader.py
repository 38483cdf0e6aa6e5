"""
Schema files: hand-editable YAML with three named label lists.

    version: 0
    entity_types: [Disease, Drug, Person]
    relation_types: [treats, works_at]
    attribute_types: [occupation]

Lists are written sorted so a saved schema diffs cleanly.
"""

import logging
from pathlib import Path
from typing import Union

import yaml
from pydantic import ValidationError

from app.schemas.graph_schema import Schema, SchemaValidationError

logger = logging.getLogger(__name__)

_SECTIONS = ("entity_types", "relation_types", "attribute_types")


class SchemaParseError(ValueError):
    """Raised when a schema file is unreadable or missing a section."""


def schema_from_mapping(raw: object, origin: str = "<schema>") -> Schema:
    if not isinstance(raw, dict):
        raise SchemaParseError(f"{origin}: schema must be a mapping")
    for section in _SECTIONS:
        if section not in raw:
            raise SchemaParseError(f"{origin}: missing section {section!r}")
        labels = raw[section]
        if labels is None:
            raw[section] = []
        elif not isinstance(labels, list):
            raise SchemaParseError(f"{origin}: section {section!r} must be a list")
    try:
        return Schema(
            entity_types=frozenset(str(label) for label in raw["entity_types"]),
            relation_types=frozenset(str(label) for label in raw["relation_types"]),
            attribute_types=frozenset(str(label) for label in raw["attribute_types"]),
            version=int(raw.get("version", 0)),
        )
    except ValidationError as exc:
        messages = "; ".join(str(err["msg"]).removeprefix("Value error, ") for err in exc.errors())
        raise SchemaValidationError(f"{origin}: {messages}") from exc


def load_schema(source: Union[str, Path]) -> Schema:
    path = Path(source)
    try:
        with open(path, encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise SchemaParseError(f"{path}: invalid YAML ({exc})") from exc
    schema = schema_from_mapping(raw, origin=str(path))
    logger.info(
        "Loaded schema v%d from %s (%d entity, %d relation, %d attribute types)",
        schema.version,
        path,
        len(schema.entity_types),
        len(schema.relation_types),
        len(schema.attribute_types),
    )
    return schema


def schema_to_mapping(schema: Schema) -> dict:
    return {
        "version": schema.version,
        "entity_types": sorted(schema.entity_types),
        "relation_types": sorted(schema.relation_types),
        "attribute_types": sorted(schema.attribute_types),
    }


def save_schema(schema: Schema, destination: Union[str, Path]) -> Path:
    path = Path(destination)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        yaml.safe_dump(schema_to_mapping(schema), f, sort_keys=False, allow_unicode=True)
    return path
