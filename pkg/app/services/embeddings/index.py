"""
Exact vector indexes.

Search is a full cosine scan, so top_k() always equals the brute-force
oracle: descending score, ties broken by ascending id.

On-disk format (one index per file, UTF-8 text):
    # kind=entity dim=16 count=2
    1<TAB>0.125 -0.5 ...
    2<TAB>...
Floats are written with repr(), which round-trips bit-exact.
"""

import logging
from enum import Enum
from pathlib import Path
from typing import Union

import numpy as np

from app.schemas.common import id_sort_key
from app.services.embeddings.vectors import DimensionMismatchError

logger = logging.getLogger(__name__)


class IndexKind(str, Enum):
    ENTITY = "entity"
    TRIPLE = "triple"
    COMMUNITY = "community"
    KEYWORD = "keyword"
    ATTRIBUTE = "attribute"
    EDGE = "edge"
    REPRESENTATION = "representation"


class IndexParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class VectorIndex:
    def __init__(self, kind: IndexKind, keys: list[str], vectors: np.ndarray, dimension: int):
        vectors = np.asarray(vectors, dtype=np.float64).reshape(len(keys), dimension)
        if len(set(keys)) != len(keys):
            raise ValueError(f"{kind.value} index has duplicate keys")
        self.kind = kind
        self.keys = list(keys)
        self.vectors = vectors
        self.dimension = dimension
        self._norms = np.linalg.norm(vectors, axis=1)
        self._positions = {key: i for i, key in enumerate(self.keys)}

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key: str) -> bool:
        return key in self._positions

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VectorIndex):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.keys == other.keys
            and self.dimension == other.dimension
            and np.array_equal(self.vectors, other.vectors)
        )

    def vector(self, key: str) -> np.ndarray:
        return self.vectors[self._positions[key]]

    def scores(self, query: np.ndarray) -> np.ndarray:
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"query of shape {query.shape} against {self.kind.value} index of dim {self.dimension}"
            )
        if not self.keys:
            return np.zeros(0)
        qn = np.linalg.norm(query)
        denom = self._norms * qn
        dots = self.vectors @ query
        safe = np.where(denom > 0.0, denom, 1.0)
        return np.clip(np.where(denom > 0.0, dots / safe, 0.0), -1.0, 1.0)

    def top_k(self, query: np.ndarray, k: int) -> list[tuple[str, float]]:
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        scores = self.scores(query)
        ranked = sorted(
            zip(self.keys, scores.tolist()),
            key=lambda pair: (-pair[1], id_sort_key(pair[0])),
        )
        return ranked[:k]

    @classmethod
    def build(
        cls, kind: IndexKind, items: list[tuple[str, np.ndarray]], dimension: int
    ) -> "VectorIndex":
        keys = [key for key, _ in items]
        if not items:
            return cls(kind, [], np.zeros((0, dimension)), dimension)
        return cls(kind, keys, np.vstack([vec for _, vec in items]), dimension)


def save_index(index: VectorIndex, destination: Union[str, Path]) -> Path:
    path = Path(destination)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# kind={index.kind.value} dim={index.dimension} count={len(index)}\n")
        for key, row in zip(index.keys, index.vectors):
            values = " ".join(repr(float(x)) for x in row)
            f.write(f"{key}\t{values}\n")
    return path


def load_index(source: Union[str, Path]) -> VectorIndex:
    path = Path(source)
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise IndexParseError(1, "missing header")
    try:
        header = dict(part.split("=", 1) for part in lines[0][2:].split())
        kind = IndexKind(header["kind"])
        dimension = int(header["dim"])
        count = int(header["count"])
    except (KeyError, ValueError) as exc:
        raise IndexParseError(1, f"bad header: {exc}") from exc

    keys: list[str] = []
    rows: list[list[float]] = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        key, sep, values = line.partition("\t")
        if not sep:
            raise IndexParseError(line_no, "expected '<id>\\t<values>'")
        try:
            row = [float(x) for x in values.split()]
        except ValueError as exc:
            raise IndexParseError(line_no, str(exc)) from exc
        if len(row) != dimension:
            raise IndexParseError(line_no, f"expected {dimension} values, got {len(row)}")
        keys.append(key)
        rows.append(row)
    if len(keys) != count:
        raise IndexParseError(len(lines), f"header says {count} rows, found {len(keys)}")
    return VectorIndex(kind, keys, np.asarray(rows).reshape(count, dimension), dimension)
