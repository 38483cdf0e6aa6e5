"""
Reciprocal-rank fusion of route results.

    fused(item) = Σ over route results containing the item of 1 / (c + rank)

rank is 1-based within each route result and c defaults to 60. Items are
keyed by (kind, id); an item repeated inside one result counts at its best
rank only. Sums use math.fsum over sorted terms and ties break on
(kind, id), so the output does not depend on the order results arrive in.
"""

import logging
import math
from collections import defaultdict

from app.schemas.common import id_sort_key
from app.schemas.retrieval import ContextItem, RouteResult

logger = logging.getLogger(__name__)

RRF_CONSTANT = 60


def fuse_results(
    results: list[RouteResult], top_k: int, rrf_constant: int = RRF_CONSTANT
) -> list[ContextItem]:
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    terms: dict[tuple[str, str], list[float]] = defaultdict(list)
    texts: dict[tuple[str, str], str] = {}
    for result in results:
        seen: set[tuple[str, str]] = set()
        for rank, hit in enumerate(result.hits, start=1):
            key = (hit.kind, hit.item_id)
            if key in seen:
                continue
            seen.add(key)
            terms[key].append(1.0 / (rrf_constant + rank))
            # identical items carry identical text; keep the smallest for stability
            texts[key] = min(texts.get(key, hit.text), hit.text)

    fused = [
        ContextItem(kind=kind, item_id=item_id, score=math.fsum(sorted(values)), text=texts[(kind, item_id)])
        for (kind, item_id), values in terms.items()
    ]
    fused.sort(key=lambda item: (-item.score, item.kind, id_sort_key(item.item_id)))
    return fused[:top_k]


def render_context(items: list[ContextItem]) -> str:
    """Numbered evidence lines in fused order; empty string when nothing was found."""
    return "\n".join(f"[{i}] {item.text}" for i, item in enumerate(items, start=1))
