"""
Entity anonymization: replace person and location names with stable
placeholders so answers cannot come from a model's memory of the source text.

Design rules enforced here:
  - One dictionary is applied to the corpus and to every QA item, so a
    surface form maps to the same placeholder everywhere
  - Longest surface form wins at any position ("New York City" before "New York")
  - Keys only match on whole words; a key embedded in a longer word is left alone
  - Equal-length keys that can overlap in text are an ambiguous tie and are
    rejected up front, listing the pairs
"""

import json
import logging
import re
import string
from pathlib import Path
from typing import Optional, Union

from pydantic import Field, field_validator, model_validator

from app.config.pipeline_config import ExtractionConfig
from app.schemas.common import BaseSchema
from app.schemas.cost import CostReport
from app.schemas.evaluation import PLACEHOLDER_RE, QAItem
from app.schemas.extraction import Document
from app.schemas.graph_schema import Schema
from app.services.extraction.extractor import extract_corpus
from app.services.providers.base import GenerationProvider

logger = logging.getLogger(__name__)

# Entity types kept by dictionary construction, and their placeholder tags
DICTIONARY_TYPES = {"Person": "PERSON", "Location": "LOCATION"}
DICTIONARY_SCHEMA = Schema(
    entity_types=frozenset(DICTIONARY_TYPES),
    relation_types=frozenset({"related_to"}),
    attribute_types=frozenset({"alias"}),
)

_PLACEHOLDER_IN_TEXT_RE = re.compile(r"[A-Z][A-Z_]*#\d+(?!\d)")
# "PERSON#200: Queequeg", "PERSON#200 = Queequeg", "PERSON#200 -> Queequeg", "PERSON#200——Queequeg"
_REVERSION_LINE_RE = re.compile(r"([A-Z][A-Z_]*#\d+)\s*(?:[:=]|—+|-+>?)\s*(.+)")


class AnonymizationConflictError(ValueError):
    def __init__(self, conflicts: list[tuple[str, str]]):
        pairs = "; ".join(f"{a!r} / {b!r}" for a, b in conflicts)
        super().__init__(f"Ambiguous overlapping dictionary keys: {pairs}")
        self.conflicts = conflicts


class AnonymizationDictionary(BaseSchema):
    mapping: dict[str, str] = Field(default_factory=dict)  # surface form → placeholder

    @field_validator("mapping")
    @classmethod
    def _check_entries(cls, mapping: dict[str, str]) -> dict[str, str]:
        for surface, placeholder in mapping.items():
            if not surface.strip():
                raise ValueError("dictionary surface forms must be nonempty")
            if not PLACEHOLDER_RE.match(placeholder):
                raise ValueError(f"placeholder {placeholder!r} does not match TYPE#integer")
        return mapping

    @model_validator(mode="after")
    def _check_bijective(self) -> "AnonymizationDictionary":
        seen: dict[str, str] = {}
        for surface, placeholder in self.mapping.items():
            if placeholder in seen:
                raise ValueError(
                    f"placeholder {placeholder} assigned to both {seen[placeholder]!r} and {surface!r}"
                )
            seen[placeholder] = surface
        return self

    @property
    def inverse(self) -> dict[str, str]:
        return {placeholder: surface for surface, placeholder in self.mapping.items()}

    @property
    def type_tags(self) -> frozenset[str]:
        return frozenset(p.split("#", 1)[0] for p in self.mapping.values())

    def __len__(self) -> int:
        return len(self.mapping)

    def conflicts(self) -> list[tuple[str, str]]:
        """Equal-length key pairs where a proper suffix of one is a prefix of the other."""
        by_length: dict[int, list[str]] = {}
        for key in sorted(self.mapping):
            by_length.setdefault(len(key), []).append(key)
        found = []
        for keys in by_length.values():
            for i, a in enumerate(keys):
                for b in keys[i + 1:]:
                    if _overlaps(a, b) or _overlaps(b, a):
                        found.append((a, b))
        return found


def _overlaps(a: str, b: str) -> bool:
    return any(a[i:] == b[: len(a) - i] for i in range(1, len(a)))


def _key_pattern(key: str) -> str:
    pattern = re.escape(key)
    if key[0].isalnum() or key[0] == "_":
        pattern = r"(?<!\w)" + pattern
    if key[-1].isalnum() or key[-1] == "_":
        pattern = pattern + r"(?!\w)"
    return pattern


def _compile(dictionary: AnonymizationDictionary) -> Optional[re.Pattern]:
    if not dictionary.mapping:
        return None
    conflicts = dictionary.conflicts()
    if conflicts:
        raise AnonymizationConflictError(conflicts)
    keys = sorted(dictionary.mapping, key=lambda k: (-len(k), k))
    return re.compile("|".join(_key_pattern(k) for k in keys))


def anonymize_text(text: str, dictionary: AnonymizationDictionary) -> tuple[str, int]:
    """Returns (anonymized text, replacement count)."""
    pattern = _compile(dictionary)
    if pattern is None:
        return text, 0
    return _substitute(pattern, text, dictionary)


def _substitute(pattern: re.Pattern, text: str, dictionary: AnonymizationDictionary) -> tuple[str, int]:
    return pattern.subn(lambda m: dictionary.mapping[m.group(0)], text)


def deanonymize(text: str, dictionary: AnonymizationDictionary) -> str:
    """Inverse of anonymize_text; placeholders not in the dictionary are left as-is."""
    inverse = dictionary.inverse
    return _PLACEHOLDER_IN_TEXT_RE.sub(lambda m: inverse.get(m.group(0), m.group(0)), text)


def anonymize_corpus(
    documents: list[Document], dictionary: AnonymizationDictionary
) -> tuple[list[Document], int]:
    """Returns (anonymized documents in input order, total replacement count)."""
    pattern = _compile(dictionary)
    if pattern is None:
        return list(documents), 0
    result, total = [], 0
    for document in documents:
        text, count = _substitute(pattern, document.text, dictionary)
        result.append(Document(id=document.id, text=text))
        total += count
    logger.info("Anonymized %d documents (%d replacements)", len(documents), total)
    return result, total


def anonymize_items(items: list[QAItem], dictionary: AnonymizationDictionary) -> list[QAItem]:
    """Question, gold answers and options go through the same dictionary as the corpus."""
    pattern = _compile(dictionary)
    if pattern is None:
        return list(items)

    def sub(text: str) -> str:
        return _substitute(pattern, text, dictionary)[0]

    return [
        item.model_copy(
            update={
                "question": sub(item.question),
                "gold": [sub(g) for g in item.gold],
                "options": {label: sub(text) for label, text in item.options.items()},
            }
        )
        for item in items
    ]


# ── Dictionary construction ──────────────────────────────────────────────────


def _first_occurrence(name: str, documents: list[Document]) -> tuple[int, int]:
    for doc_index, document in enumerate(documents):
        offset = document.text.find(name)
        if offset >= 0:
            return doc_index, offset
    return len(documents), 0


def build_dictionary(
    documents: list[Document],
    provider: GenerationProvider,
    params: Optional[ExtractionConfig] = None,
) -> tuple[AnonymizationDictionary, CostReport]:
    """
    Extract persons and locations, then number them per type in order of first
    appearance in the corpus (document order, then character offset).
    """
    params = (params or ExtractionConfig()).model_copy(update={"expand_schema": False, "reextract": False})
    run = extract_corpus(documents, DICTIONARY_SCHEMA, provider, params)

    entities = [e for e in run.graph.entities.values() if e.etype in DICTIONARY_TYPES]
    entities.sort(key=lambda e: (*_first_occurrence(e.name, documents), e.name))

    counters = {tag: 0 for tag in DICTIONARY_TYPES.values()}
    mapping: dict[str, str] = {}
    for entity in entities:
        tag = DICTIONARY_TYPES[entity.etype]
        counters[tag] += 1
        mapping[entity.name] = f"{tag}#{counters[tag]}"
    logger.info("Built anonymization dictionary with %d entries", len(mapping))
    return AnonymizationDictionary(mapping=mapping), run.cost


def save_dictionary(dictionary: AnonymizationDictionary, destination: Union[str, Path]) -> Path:
    path = Path(destination)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(dictionary.mapping, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    return path


def load_dictionary(source: Union[str, Path]) -> AnonymizationDictionary:
    raw = json.loads(Path(source).read_text(encoding="utf-8"))
    return AnonymizationDictionary(mapping=raw)


# ── Anonymity reversion ──────────────────────────────────────────────────────


def normalize_surface(text: str) -> str:
    return " ".join(text.split()).strip(string.punctuation + " ").casefold()


def parse_reversion_mapping(text: str) -> dict[str, str]:
    """Read 'PLACEHOLDER: name' pairs out of a free-text answer; first pair per placeholder wins."""
    mapping: dict[str, str] = {}
    for line in text.splitlines():
        for part in re.split(r"[;,]\s*(?=[A-Z][A-Z_]*#\d)", line):
            match = _REVERSION_LINE_RE.search(part)
            if match and match.group(1) not in mapping:
                mapping[match.group(1)] = match.group(2).strip()
    return mapping


def score_anonymity_reversion(predicted: dict[str, str], gold: dict[str, str]) -> float:
    """Share of gold placeholders whose predicted surface form matches after normalization."""
    if not gold:
        raise ValueError("gold mapping must be nonempty")
    hits = sum(
        1
        for placeholder, surface in gold.items()
        if placeholder in predicted
        and normalize_surface(predicted[placeholder]) == normalize_surface(surface)
    )
    return hits / len(gold)
