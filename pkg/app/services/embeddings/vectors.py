"""
Vector helpers and the shared embedding cache.

Every text is embedded once per cache and stored unit-normalized; zero
vectors stay zero. cosine() returns 0 when either side is all-zero.
"""

import logging
import threading
from typing import Iterable

import numpy as np

from app.schemas.cost import ZERO_COST, CostReport, merge_costs
from app.services.providers.base import EmbeddingProvider

logger = logging.getLogger(__name__)


class DimensionMismatchError(ValueError):
    """Raised when two vectors (or a vector and an index) disagree on dimension."""


def unit_normalize(vector: np.ndarray) -> np.ndarray:
    vector = np.asarray(vector, dtype=np.float64)
    norm = np.linalg.norm(vector)
    if norm == 0.0:
        return np.zeros_like(vector)
    return vector / norm


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatchError(f"cosine of shapes {u.shape} and {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


class EmbeddingCache:
    """
    Text → unit vector, filled in batches. prime() embeds only the texts not
    seen before, in sorted order, with a single provider call, so the set of
    calls depends on the set of texts and not on who asked first.
    """

    def __init__(self, provider: EmbeddingProvider):
        self.provider = provider
        self.dimension = provider.dimension
        self._vectors: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        self.cost: CostReport = ZERO_COST

    def __contains__(self, text: str) -> bool:
        return text in self._vectors

    def prime(self, texts: Iterable[str]) -> CostReport:
        """Embed every unseen text; returns the cost of this call (zero if all cached)."""
        with self._lock:
            missing = sorted({t for t in texts if t not in self._vectors})
            if not missing:
                return ZERO_COST
            batch = self.provider.embed(missing)
            for text, vector in zip(missing, batch.vectors):
                self._vectors[text] = unit_normalize(vector)
            self.cost = merge_costs(self.cost, batch.cost)
            logger.debug("Embedded %d new texts", len(missing))
            return batch.cost

    def get(self, text: str) -> np.ndarray:
        if text not in self._vectors:
            self.prime([text])
        return self._vectors[text]

    def matrix(self, texts: list[str]) -> np.ndarray:
        self.prime(texts)
        if not texts:
            return np.zeros((0, self.dimension))
        return np.vstack([self._vectors[t] for t in texts])
