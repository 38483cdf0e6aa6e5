"""
Schema-enhanced query decomposition.

The decompose template asks for lines of the form
    route | sub-query | label, label, ...
Lines with an unknown route or no text are dropped (counted and logged).
Labels that are not in the current schema are removed from the bindings and
recorded as unbound on the sub-query. At most max_subqueries lines are kept;
if nothing parses, the whole question becomes one triple-route sub-query.
"""

import logging
import re

from app.schemas.cost import CostReport, GenerationRequest
from app.schemas.graph_schema import Schema
from app.schemas.retrieval import Route, SubQuery
from app.services.providers.base import GenerationProvider

logger = logging.getLogger(__name__)

_NUMBERING = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*")
_ROUTES = {route.value: route for route in Route}


def parse_subqueries(text: str, schema: Schema, max_subqueries: int) -> tuple[list[SubQuery], int]:
    """Returns (sub-queries, dropped line count)."""
    subqueries: list[SubQuery] = []
    dropped = 0
    for raw in text.splitlines():
        line = _NUMBERING.sub("", raw).strip()
        if not line:
            continue
        parts = [part.strip() for part in line.split("|")]
        route = _ROUTES.get(parts[0].casefold()) if parts else None
        if route is None or len(parts) < 2 or not parts[1]:
            dropped += 1
            continue
        labels = [label.strip() for label in parts[2].split(",")] if len(parts) > 2 else []
        labels = [label for label in labels if label]
        bound = [label for label in labels if schema.contains(label)]
        unbound = [label for label in labels if not schema.contains(label)]
        if unbound:
            logger.warning("Sub-query %r uses labels outside the schema: %s", parts[1], unbound)
        subqueries.append(
            SubQuery(text=parts[1], route=route, schema_bindings=bound, unbound=unbound, ordinal=0)
        )
    subqueries = [
        sq.model_copy(update={"ordinal": i}) for i, sq in enumerate(subqueries[:max_subqueries])
    ]
    return subqueries, dropped


def decompose_query(
    question: str,
    schema: Schema,
    provider: GenerationProvider,
    max_subqueries: int = 4,
    history: str = "",
) -> tuple[list[SubQuery], CostReport]:
    if not question.strip():
        raise ValueError("question must be nonempty")
    if max_subqueries < 1:
        raise ValueError(f"max_subqueries must be >= 1, got {max_subqueries}")

    generation = provider.generate(
        GenerationRequest(
            template_id="decompose",
            variables={
                **schema.prompt_variables(),
                "question": question,
                "history": history or "(none)",
                "max_subqueries": str(max_subqueries),
            },
        )
    )
    subqueries, dropped = parse_subqueries(generation.text, schema, max_subqueries)
    if dropped:
        logger.warning("Decomposer dropped %d unparseable lines", dropped)
    if not subqueries:
        logger.warning("Decomposition yielded nothing; falling back to the full question")
        subqueries = [SubQuery(text=question.strip(), route=Route.TRIPLE, ordinal=0)]
    return subqueries, generation.cost
