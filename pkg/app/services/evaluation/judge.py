"""
Answer judging.

Design rules enforced here:
  - The abstention sentinel is always incorrect and never reaches the judge
  - Multiple-choice items are scored by normalized option label, no judge call
  - Anonymity-reversion items are scored by placeholder recovery, no judge call
  - The judge's reply is read from its first word only; anything other than
    CORRECT / INCORRECT is an error verdict, never a guess
"""

import logging
import re
import string
from dataclasses import dataclass
from typing import Iterable, Optional

from app.schemas.cost import ZERO_COST, CostReport, GenerationRequest
from app.schemas.evaluation import JudgeVerdict, QAItem, QAType
from app.schemas.retrieval import ABSTENTION_SENTINEL
from app.services.evaluation.anonymizer import parse_reversion_mapping, score_anonymity_reversion
from app.services.providers.base import GenerationProvider

logger = logging.getLogger(__name__)

_FIRST_WORD_RE = re.compile(r"[A-Za-z]+")
_OPTION_LABEL_RE = re.compile(r"^\s*\(?([A-Za-z0-9]+)[\).:]?(?:\s|$)")
_STANDALONE_LABEL_RE = re.compile(r"\b([A-Z])\b")


@dataclass
class Judgement:
    verdict: JudgeVerdict
    judge_calls: int = 0
    cost: CostReport = ZERO_COST
    reversion_score: Optional[float] = None
    raw: str = ""


def normalize_label(label: str) -> str:
    """'  C. ' → 'c'"""
    return label.strip().casefold().strip(string.punctuation + string.whitespace)


def option_label(answer: str, labels: Optional[Iterable[str]] = None) -> str:
    """
    Option label of a multiple-choice answer ('C. Ahab' → 'c'). A leading
    label wins; otherwise, when the item's labels are known, the last
    standalone capital letter naming one of them ('The answer is C' → 'c').
    """
    known = {normalize_label(label) for label in labels} if labels is not None else None
    match = _OPTION_LABEL_RE.match(answer)
    if match:
        leading = normalize_label(match.group(1))
        if known is None or leading in known:
            return leading
    if known:
        standalone = [
            normalize_label(letter)
            for letter in _STANDALONE_LABEL_RE.findall(answer)
            if normalize_label(letter) in known
        ]
        if standalone:
            return standalone[-1]
    return normalize_label(answer)


def parse_judge_reply(text: str) -> JudgeVerdict:
    match = _FIRST_WORD_RE.search(text)
    word = match.group(0).upper() if match else ""
    if word == "CORRECT":
        return JudgeVerdict.CORRECT
    if word == "INCORRECT":
        return JudgeVerdict.INCORRECT
    logger.warning("Unparseable judge reply %r", text[:80])
    return JudgeVerdict.ERROR


def judge_answer(
    predicted: str,
    gold: list[str],
    provider: Optional[GenerationProvider],
    question: str = "",
    item: Optional[QAItem] = None,
) -> Judgement:
    if not gold:
        raise ValueError("judge_answer needs a nonempty gold answer")
    if predicted.strip() == ABSTENTION_SENTINEL or not predicted.strip():
        return Judgement(verdict=JudgeVerdict.INCORRECT)

    qtype = item.qtype if item is not None else QAType.FREEFORM
    if qtype == QAType.MULTIPLE_CHOICE:
        hit = option_label(predicted, item.options) == normalize_label(gold[0])
        return Judgement(verdict=JudgeVerdict.CORRECT if hit else JudgeVerdict.INCORRECT)
    if qtype == QAType.ANONYMITY_REVERSION:
        score = score_anonymity_reversion(parse_reversion_mapping(predicted), item.reversion_gold)
        verdict = JudgeVerdict.CORRECT if score == 1.0 else JudgeVerdict.INCORRECT
        return Judgement(verdict=verdict, reversion_score=score)

    if provider is None:
        raise ValueError("free-form answers need a judge provider")
    generation = provider.generate(
        GenerationRequest(
            template_id="judge",
            variables={"question": question, "gold": " | ".join(gold), "predicted": predicted.strip()},
        )
    )
    return Judgement(
        verdict=parse_judge_reply(generation.text),
        judge_calls=1,
        cost=generation.cost,
        raw=generation.text,
    )
