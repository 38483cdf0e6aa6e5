"""
Benchmark harness.

Pipeline steps:
  1. Answer every item on the worker pool, via the agent loop or the
     single-pass retriever, in the requested answer mode.
  2. Judge each answer (sentinel / multiple-choice / reversion / judge call).
  3. Record one ItemRecord per item; an item that raises is recorded with an
     error verdict and the run continues.
  4. Aggregate into an EvalReport (abstentions count as incorrect).
  5. If an output directory is given, persist records.jsonl, report.json and
     a summary table broken down by question type and difficulty.
"""

import logging
from pathlib import Path
from typing import Optional, Union

import pandas as pd

from app.schemas.cost import MergeMode, sum_costs
from app.schemas.evaluation import EvalReport, ItemRecord, JudgeVerdict, QAItem
from app.schemas.retrieval import AnswerMode
from app.services.evaluation.judge import judge_answer
from app.services.evaluation.records import RECORDS_FILE, write_records
from app.services.providers.base import GenerationProvider
from app.services.retrieval.agent import Retriever
from app.workers.pool import run_ordered

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
SUMMARY_FILE = "summary.txt"


class EmptyDatasetError(ValueError):
    def __init__(self) -> None:
        super().__init__("empty dataset")


def evaluate_item(
    item: QAItem,
    retriever: Retriever,
    judge_provider: GenerationProvider,
    mode: AnswerMode,
    use_agent: bool,
    top_k: int,
) -> ItemRecord:
    question = item.rendered_question()
    if use_agent:
        answer, trace = retriever.agent_answer(question, mode, top_k)
    else:
        answer, trace = retriever.answer_no_agent(question, mode, top_k)
    judgement = judge_answer(answer, item.gold, judge_provider, question=item.question, item=item)
    return ItemRecord(
        item_id=item.id,
        qtype=item.qtype,
        difficulty=item.difficulty,
        language=item.language,
        question=item.question,
        gold=item.gold,
        predicted=answer,
        verdict=judgement.verdict,
        abstained=trace.abstained,
        judge_calls=judgement.judge_calls,
        iterations=len(trace.iterations),
        reversion_score=judgement.reversion_score,
        error="unparseable judge reply" if judgement.verdict == JudgeVerdict.ERROR else None,
        cost=sum_costs([trace.cost, judgement.cost], MergeMode.SEQUENTIAL),
    )


def _failed_record(item: QAItem, error: BaseException) -> ItemRecord:
    return ItemRecord(
        item_id=item.id,
        qtype=item.qtype,
        difficulty=item.difficulty,
        language=item.language,
        question=item.question,
        gold=item.gold,
        verdict=JudgeVerdict.ERROR,
        error=f"{type(error).__name__}: {error}",
    )


def recompute_report(
    records: list[ItemRecord], mode: AnswerMode, agent: bool, top_k: int
) -> EvalReport:
    """Aggregate item records; run_benchmark reports exactly this."""
    if not records:
        raise EmptyDatasetError()
    total = len(records)
    correct = sum(1 for r in records if r.correct)
    abstentions = sum(1 for r in records if r.abstained)
    reversion = [r.reversion_score for r in records if r.reversion_score is not None]
    cost = sum_costs([r.cost for r in records], MergeMode.SEQUENTIAL)
    return EvalReport(
        mode=mode,
        agent=agent,
        top_k=top_k,
        total=total,
        correct=correct,
        accuracy=correct / total,
        abstentions=abstentions,
        abstention_rate=abstentions / total,
        errors=sum(1 for r in records if r.verdict == JudgeVerdict.ERROR),
        reversion_accuracy=sum(reversion) / len(reversion) if reversion else None,
        verdicts={r.item_id: r.verdict for r in records},
        cost=cost,
        wall_time=cost.wall_time,
    )


def summary_table(records: list[ItemRecord]) -> pd.DataFrame:
    """Accuracy and abstention rate per (qtype, difficulty), plus an overall row."""
    df = pd.DataFrame(
        {
            "qtype": [r.qtype.value for r in records],
            "difficulty": [r.difficulty or "-" for r in records],
            "correct": [r.correct for r in records],
            "abstained": [r.abstained for r in records],
            "error": [r.verdict == JudgeVerdict.ERROR for r in records],
        }
    )
    grouped = (
        df.groupby(["qtype", "difficulty"], sort=True)
        .agg(
            items=("correct", "size"),
            accuracy=("correct", "mean"),
            abstention_rate=("abstained", "mean"),
            errors=("error", "sum"),
        )
        .reset_index()
    )
    overall = pd.DataFrame(
        [
            {
                "qtype": "all",
                "difficulty": "-",
                "items": len(df),
                "accuracy": df["correct"].mean(),
                "abstention_rate": df["abstained"].mean(),
                "errors": int(df["error"].sum()),
            }
        ]
    )
    return pd.concat([grouped, overall], ignore_index=True)


def write_report(
    report: EvalReport, records: list[ItemRecord], output_dir: Union[str, Path]
) -> dict[str, Optional[Path]]:
    directory = Path(output_dir)
    directory.mkdir(parents=True, exist_ok=True)
    report_path = directory / REPORT_FILE
    report_path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    summary_path = directory / SUMMARY_FILE
    summary_path.write_text(
        summary_table(records).to_string(index=False, float_format=lambda x: f"{x:.4f}") + "\n",
        encoding="utf-8",
    )
    return {
        "records": write_records(records, directory / RECORDS_FILE),
        "report": report_path,
        "summary": summary_path,
    }


def run_benchmark(
    items: list[QAItem],
    retriever: Retriever,
    judge_provider: GenerationProvider,
    mode: AnswerMode,
    use_agent: bool = True,
    top_k: Optional[int] = None,
    workers: int = 1,
    output_dir: Optional[Union[str, Path]] = None,
) -> tuple[EvalReport, list[ItemRecord]]:
    if not items:
        raise EmptyDatasetError()
    top_k = top_k or retriever.params.top_k
    logger.info(
        "Benchmark: %d items, mode=%s, agent=%s, top_k=%d, workers=%d",
        len(items),
        mode.value,
        use_agent,
        top_k,
        workers,
    )

    outcomes = run_ordered(
        lambda item: evaluate_item(item, retriever, judge_provider, mode, use_agent, top_k),
        items,
        workers=workers,
        label="eval",
    )
    records = []
    for item, outcome in zip(items, outcomes):
        if outcome.ok:
            records.append(outcome.value)
        else:
            logger.warning("Item %s failed: %s", item.id, outcome.error)
            records.append(_failed_record(item, outcome.error))

    report = recompute_report(records, mode, use_agent, top_k)
    logger.info(
        "Benchmark done: accuracy %.4f (%d/%d), abstention rate %.4f, %d errors",
        report.accuracy,
        report.correct,
        report.total,
        report.abstention_rate,
        report.errors,
    )
    if output_dir is not None:
        write_report(report, records, output_dir)
    return report, records
