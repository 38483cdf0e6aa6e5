"""Benchmark shapes: QA items, per-item records and the aggregate report."""

import re
from enum import Enum
from typing import Optional

from pydantic import Field, field_validator, model_validator

from app.schemas.common import BaseSchema
from app.schemas.cost import ZERO_COST, CostReport
from app.schemas.retrieval import AnswerMode

PLACEHOLDER_RE = re.compile(r"^[A-Z][A-Z_]*#\d+$")


class QAType(str, Enum):
    FREEFORM = "freeform"
    MULTIPLE_CHOICE = "multiple_choice"
    ANONYMITY_REVERSION = "anonymity_reversion"


class JudgeVerdict(str, Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    ERROR = "error"  # judge reply unparseable or the item failed


class QAItem(BaseSchema):
    id: str = Field(..., min_length=1)
    question: str = Field(..., min_length=1)
    gold: list[str] = Field(..., min_length=1)
    qtype: QAType = QAType.FREEFORM
    options: dict[str, str] = Field(default_factory=dict)  # label → option text
    reversion_gold: dict[str, str] = Field(default_factory=dict)  # placeholder → surface form
    difficulty: str = ""
    language: str = "en"

    @field_validator("gold")
    @classmethod
    def _gold_nonempty(cls, gold: list[str]) -> list[str]:
        gold = [g.strip() for g in gold if g.strip()]
        if not gold:
            raise ValueError("gold must contain a nonempty answer")
        return gold

    @model_validator(mode="after")
    def _qtype_fields(self) -> "QAItem":
        if self.qtype == QAType.MULTIPLE_CHOICE:
            if not self.options:
                raise ValueError(f"multiple-choice item {self.id} has no options")
            if len(self.gold) != 1 or self.gold[0] not in self.options:
                raise ValueError(
                    f"multiple-choice item {self.id} needs exactly one gold label among its options"
                )
        if self.qtype == QAType.ANONYMITY_REVERSION:
            if not self.reversion_gold:
                raise ValueError(f"anonymity-reversion item {self.id} has no reversion_gold")
            bad = [p for p in self.reversion_gold if not PLACEHOLDER_RE.match(p)]
            if bad:
                raise ValueError(f"item {self.id}: malformed placeholders {bad}")
        return self

    def rendered_question(self) -> str:
        """Question text as sent to the retriever; options are appended for multiple choice."""
        if self.qtype != QAType.MULTIPLE_CHOICE:
            return self.question
        lines = [self.question] + [f"{label}. {text}" for label, text in sorted(self.options.items())]
        return "\n".join(lines)


class ItemRecord(BaseSchema):
    item_id: str
    qtype: QAType
    difficulty: str = ""
    language: str = "en"
    question: str
    gold: list[str]
    predicted: str = ""
    verdict: JudgeVerdict
    abstained: bool = False
    judge_calls: int = 0
    iterations: int = 0
    reversion_score: Optional[float] = None
    error: Optional[str] = None
    cost: CostReport = ZERO_COST

    @property
    def correct(self) -> bool:
        return self.verdict == JudgeVerdict.CORRECT


class EvalReport(BaseSchema):
    mode: AnswerMode
    agent: bool
    top_k: int
    total: int
    correct: int
    accuracy: float
    abstentions: int
    abstention_rate: float
    errors: int
    reversion_accuracy: Optional[float] = None
    verdicts: dict[str, JudgeVerdict] = Field(default_factory=dict)
    cost: CostReport = ZERO_COST
    wall_time: float = 0.0
