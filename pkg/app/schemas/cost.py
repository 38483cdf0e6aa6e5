"""
Provider request and cost-accounting shapes.

CostReport is additive: token and call counters always sum; wall_time sums
for sequential work and takes the max for work that ran side by side.
"""

from enum import Enum

from pydantic import Field

from app.schemas.common import FrozenSchema


class MergeMode(str, Enum):
    SEQUENTIAL = "sequential"
    PARALLEL = "parallel"


class CostReport(FrozenSchema):
    prompt_tokens: int = Field(default=0, ge=0)
    completion_tokens: int = Field(default=0, ge=0)
    llm_calls: int = Field(default=0, ge=0)
    embedding_calls: int = Field(default=0, ge=0)
    wall_time: float = Field(default=0.0, ge=0.0)  # seconds

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


ZERO_COST = CostReport()


def merge_costs(
    a: CostReport, b: CostReport, mode: MergeMode = MergeMode.SEQUENTIAL
) -> CostReport:
    """Componentwise sum; wall_time is max(a, b) for parallel merges."""
    if mode == MergeMode.PARALLEL:
        wall_time = max(a.wall_time, b.wall_time)
    else:
        wall_time = a.wall_time + b.wall_time
    return CostReport(
        prompt_tokens=a.prompt_tokens + b.prompt_tokens,
        completion_tokens=a.completion_tokens + b.completion_tokens,
        llm_calls=a.llm_calls + b.llm_calls,
        embedding_calls=a.embedding_calls + b.embedding_calls,
        wall_time=wall_time,
    )


def sum_costs(
    reports: list[CostReport], mode: MergeMode = MergeMode.SEQUENTIAL
) -> CostReport:
    total = ZERO_COST
    for report in reports:
        total = merge_costs(total, report, mode)
    return total


class GenerationRequest(FrozenSchema):
    template_id: str
    variables: dict[str, str] = Field(default_factory=dict)
    max_output: int | None = Field(default=None, ge=1)  # None → template default


class Generation(FrozenSchema):
    text: str
    prompt: str  # rendered user prompt, kept for traces
    cost: CostReport
