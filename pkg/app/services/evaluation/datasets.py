"""
Dataset and corpus files: one JSON record per line.

    corpus:   {"id": "doc1", "text": "..."}
    dataset:  {"id": "q1", "question": "...", "gold": ["..."], "qtype": "freeform", ...}
"""

import json
import logging
from pathlib import Path
from typing import Type, TypeVar, Union

from pydantic import BaseModel, ValidationError

from app.schemas.evaluation import QAItem
from app.schemas.extraction import Document

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)


class DatasetParseError(ValueError):
    def __init__(self, path: Path, line_no: int, message: str):
        super().__init__(f"{path} line {line_no}: {message}")
        self.line_no = line_no


def _read_jsonl(path: Union[str, Path], model: Type[M]) -> list[M]:
    path = Path(path)
    records: list[M] = []
    ids: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = model.model_validate(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DatasetParseError(path, line_no, f"invalid JSON ({exc.msg})") from exc
            except ValidationError as exc:
                raise DatasetParseError(path, line_no, str(exc)) from exc
            record_id = getattr(record, "id")
            if record_id in ids:
                raise DatasetParseError(path, line_no, f"duplicate id {record_id!r}")
            ids.add(record_id)
            records.append(record)
    logger.info("Loaded %d %s records from %s", len(records), model.__name__, path)
    return records


def _write_jsonl(records: list[BaseModel], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(json.dumps(record.model_dump(mode="json"), sort_keys=True, ensure_ascii=False) + "\n")
    return path


def load_corpus(path: Union[str, Path]) -> list[Document]:
    return _read_jsonl(path, Document)


def save_corpus(documents: list[Document], path: Union[str, Path]) -> Path:
    return _write_jsonl(documents, path)


def load_dataset(path: Union[str, Path]) -> list[QAItem]:
    return _read_jsonl(path, QAItem)


def save_dataset(items: list[QAItem], path: Union[str, Path]) -> Path:
    return _write_jsonl(items, path)
