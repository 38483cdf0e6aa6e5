"""Retrieval shapes: sub-queries, route hits, fused context and agent traces."""

from enum import Enum
from typing import Optional

from pydantic import Field

from app.schemas.common import BaseSchema, FrozenSchema
from app.schemas.cost import ZERO_COST, CostReport

ABSTENTION_SENTINEL = "INSUFFICIENT_EVIDENCE"


class Route(str, Enum):
    ENTITY = "entity"
    TRIPLE = "triple"
    COMMUNITY = "community"
    PATH = "path"


class AnswerMode(str, Enum):
    OPEN = "open"
    REJECT = "reject"


class Verdict(str, Enum):
    ANSWER = "answer"
    REFINE = "refine"
    INSUFFICIENT = "insufficient"


class SubQuery(FrozenSchema):
    text: str = Field(..., min_length=1)
    route: Route
    schema_bindings: list[str] = Field(default_factory=list)
    unbound: list[str] = Field(default_factory=list)  # labels dropped as not in schema
    ordinal: int = Field(default=0, ge=0)

    @property
    def flagged(self) -> bool:
        return bool(self.unbound)


class Hit(FrozenSchema):
    kind: str  # entity | triple | attribute | community | path
    item_id: str
    score: float
    text: str


class RouteResult(BaseSchema):
    route: Route
    sub_query: int = 0  # ordinal of the sub-query this ran for
    hits: list[Hit] = Field(default_factory=list)
    cost: CostReport = ZERO_COST


class ContextItem(FrozenSchema):
    kind: str
    item_id: str
    score: float  # fused reciprocal-rank score
    text: str


class Iteration(BaseSchema):
    step: int
    sub_queries: list[SubQuery] = Field(default_factory=list)
    route_results: list[RouteResult] = Field(default_factory=list)
    context: list[ContextItem] = Field(default_factory=list)
    reasoning: str = ""
    verdict: Verdict = Verdict.INSUFFICIENT
    verdict_text: str = ""  # answer text or refine focus


class AgentTrace(BaseSchema):
    question: str
    mode: AnswerMode
    agent: bool = True
    iterations: list[Iteration] = Field(default_factory=list)
    final_answer: str = ""
    final_prompt: Optional[str] = None  # rendered answer template, if one applied
    final_prompt_sent: bool = False
    cost: CostReport = ZERO_COST

    @property
    def abstained(self) -> bool:
        return self.final_answer == ABSTENTION_SENTINEL

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)
