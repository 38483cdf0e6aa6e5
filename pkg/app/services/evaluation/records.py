"""
Item records: the per-item audit trail of a benchmark run.

Design rules enforced here:
  - Records are written one JSON object per line, in dataset order
  - Writing never raises; a failed write is logged and the run continues
  - The report is always recomputable from the records alone
"""

import json
import logging
from pathlib import Path
from typing import Any, Optional, Union

from pydantic import ValidationError

from app.schemas.evaluation import ItemRecord
from app.services.evaluation.datasets import DatasetParseError

logger = logging.getLogger(__name__)

RECORDS_FILE = "records.jsonl"


def write_records(records: list[ItemRecord], destination: Union[str, Path]) -> Optional[Path]:
    """
    Persist item records. Returns the path, or None if the write failed.

    Does not raise: exceptions are caught and logged as warnings.
    """
    path = Path(destination)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for record in records:
                f.write(json.dumps(_safe_payload(record), sort_keys=True, ensure_ascii=False) + "\n")
        return path
    except Exception as exc:
        logger.warning("Failed to write %d item records to %s: %s", len(records), path, exc)
        return None


def _safe_payload(record: ItemRecord) -> dict[str, Any]:
    # mode="json" turns enums into their values; error text may hold anything
    payload = record.model_dump(mode="json")
    if payload.get("error") is not None:
        payload["error"] = str(payload["error"])
    return payload


def read_records(source: Union[str, Path]) -> list[ItemRecord]:
    path = Path(source)
    records: list[ItemRecord] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(ItemRecord.model_validate(json.loads(line)))
            except (json.JSONDecodeError, ValidationError) as exc:
                raise DatasetParseError(path, line_no, f"invalid item record: {exc}") from exc
    return records
