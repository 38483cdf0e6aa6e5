"""
Command-line entrypoint.

    python -m app.cli build     [--config run.yaml] [--workers 8] [--mu 0.8] [--chunk-size 1200]
    python -m app.cli query     "Who owns the Pequod?" [--mode reject] [--no-agent] [--top-k 20] [--trace t.json]
    python -m app.cli eval      [--dataset qa.jsonl] [--mode open] [--top-k 10] [--output reports/]
    python -m app.cli anonymize --corpus corpus.jsonl --dictionary dict.json [--build-dict] --output anon.jsonl

Flags override the pipeline config; the config overrides built-in defaults.
Exit codes: 0 success, 1 run error (message names the stage or path),
2 usage error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from app.config.pipeline_config import PipelineConfig
from app.logging_config import configure_logging
from app.schemas.retrieval import AnswerMode
from app.services.evaluation.anonymizer import (
    anonymize_corpus,
    anonymize_items,
    build_dictionary,
    load_dictionary,
    save_dictionary,
)
from app.services.evaluation.datasets import load_corpus, load_dataset, save_corpus, save_dataset
from app.services.evaluation.harness import run_benchmark
from app.services.providers.factory import get_providers
from app.services.retrieval.agent import Retriever
from app.settings import settings
from app.workers.build_pipeline import StageError, load_artifacts, run_build

logger = logging.getLogger(__name__)


# ── Argument parsing ──────────────────────────────────────────────────────────


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Pipeline config YAML (defaults if omitted)")
    parser.add_argument("--log-level", default=None, help="Overrides LOG_LEVEL")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None, help="Worker threads for every parallel stage")
    parser.add_argument("--artifacts", default=None, help="Build artifacts directory")


def _answering(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=[m.value for m in AnswerMode], default=None)
    parser.add_argument("--agent", action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--top-k", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app.cli",
        description="Schema-bounded graph retrieval: build, query, evaluate, anonymize",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    build = commands.add_parser("build", help="Extract the corpus and build the knowledge tree")
    _common(build)
    build.add_argument("--corpus", default=None)
    build.add_argument("--schema", default=None, help="Seed schema YAML")
    build.add_argument("--mu", type=float, default=None, help="Schema expansion confidence threshold")
    build.add_argument("--chunk-size", type=int, default=None)

    query = commands.add_parser("query", help="Answer one question against built artifacts")
    _common(query)
    _answering(query)
    query.add_argument("question")
    query.add_argument("--trace", default=None, help="Write the agent trace JSON here")

    evaluate = commands.add_parser("eval", help="Run a QA dataset and write a report")
    _common(evaluate)
    _answering(evaluate)
    evaluate.add_argument("--dataset", default=None)
    evaluate.add_argument("--output", default=None, help="Report directory")

    anonymize = commands.add_parser("anonymize", help="Replace person/location names with placeholders")
    _common(anonymize)
    anonymize.add_argument("--corpus", default=None)
    anonymize.add_argument("--dictionary", required=True, help="Dictionary JSON (read, or written with --build-dict)")
    anonymize.add_argument("--build-dict", action="store_true", help="Build the dictionary by extraction first")
    anonymize.add_argument("--output", required=True, help="Anonymized corpus JSONL")
    anonymize.add_argument("--dataset", default=None, help="QA dataset to anonymize with the same dictionary")
    anonymize.add_argument("--dataset-output", default=None)
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.load(args.config)
    updates = {
        "seed": args.seed,
        "extraction.workers": args.workers,
        "retrieval.workers": args.workers,
        "evaluation.workers": args.workers,
        "paths.artifacts": args.artifacts,
        "paths.corpus": getattr(args, "corpus", None),
        "paths.schema_path": getattr(args, "schema", None),
        "paths.dataset": getattr(args, "dataset", None),
        "paths.output": getattr(args, "output", None) if args.command == "eval" else None,
        "extraction.mu": getattr(args, "mu", None),
        "extraction.chunk_size": getattr(args, "chunk_size", None),
        "retrieval.mode": getattr(args, "mode", None),
        "retrieval.use_agent": getattr(args, "agent", None),
        "retrieval.top_k": getattr(args, "top_k", None),
    }
    return config.override(updates)


# ── Commands ──────────────────────────────────────────────────────────────────


def cmd_build(config: PipelineConfig) -> int:
    result = run_build(config)
    cost = result.cost
    print(f"Built {len(result.graph.entities)} entities, {len(result.graph.triples)} triples, "
          f"{len(result.tree.communities)} communities (schema v{result.schema.version})")
    print(f"Artifacts: {config.paths.artifacts}")
    print(f"Cost: {cost.prompt_tokens} prompt + {cost.completion_tokens} completion tokens, "
          f"{cost.llm_calls} LLM calls, {cost.embedding_calls} embedding calls, "
          f"{cost.wall_time:.2f}s")
    return 0


def _retriever(config: PipelineConfig):
    artifacts = load_artifacts(Path(config.paths.artifacts))
    providers = get_providers(config)
    retriever = Retriever(
        artifacts.graph,
        artifacts.tree,
        artifacts.schema,
        providers.generation,
        providers.embedding,
        config.retrieval,
    )
    return retriever, providers


def cmd_query(config: PipelineConfig, question: str, trace_path: Optional[str]) -> int:
    retriever, _ = _retriever(config)
    mode = AnswerMode(config.retrieval.mode)
    if config.retrieval.use_agent:
        answer, trace = retriever.agent_answer(question, mode)
    else:
        answer, trace = retriever.answer_no_agent(question, mode)
    print(answer)
    if trace_path:
        path = Path(trace_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(trace.to_json() + "\n", encoding="utf-8")
        logger.info("Wrote trace to %s", path)
    return 0


def cmd_eval(config: PipelineConfig) -> int:
    if not config.paths.dataset:
        raise StageError("eval", ValueError("no dataset path configured"))
    items = load_dataset(config.paths.dataset)
    retriever, providers = _retriever(config)
    report, _ = run_benchmark(
        items,
        retriever,
        providers.judge,
        AnswerMode(config.retrieval.mode),
        use_agent=config.retrieval.use_agent,
        top_k=config.retrieval.top_k,
        workers=config.evaluation.workers,
        output_dir=config.paths.output,
    )
    print(f"mode={report.mode.value} agent={report.agent} top_k={report.top_k}")
    print(f"accuracy={report.accuracy:.4f} ({report.correct}/{report.total}) "
          f"abstention_rate={report.abstention_rate:.4f} errors={report.errors}")
    print(f"Report: {config.paths.output}")
    return 0


def cmd_anonymize(config: PipelineConfig, args: argparse.Namespace) -> int:
    if not config.paths.corpus:
        raise StageError("anonymize", ValueError("no corpus path given"))
    documents = load_corpus(config.paths.corpus)
    if args.build_dict:
        providers = get_providers(config)
        dictionary, _ = build_dictionary(documents, providers.generation, config.extraction)
        save_dictionary(dictionary, args.dictionary)
    else:
        dictionary = load_dictionary(args.dictionary)

    anonymized, replacements = anonymize_corpus(documents, dictionary)
    save_corpus(anonymized, args.output)
    print(f"{len(dictionary)} dictionary entries, {replacements} replacements → {args.output}")

    if args.dataset:
        items = anonymize_items(load_dataset(args.dataset), dictionary)
        destination = args.dataset_output or str(Path(args.output).with_name("dataset.anonymized.jsonl"))
        save_dataset(items, destination)
        print(f"{len(items)} QA items → {destination}")
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or settings.log_level, settings.log_format)
    try:
        config = resolve_config(args)
        if args.command == "build":
            return cmd_build(config)
        if args.command == "query":
            return cmd_query(config, args.question, args.trace)
        if args.command == "eval":
            return cmd_eval(config)
        return cmd_anonymize(config, args)
    except StageError as exc:
        print(f"ERROR [{exc.stage}]: {exc.cause}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"ERROR [{args.command}]: {exc}", file=sys.stderr)
        logger.debug("Command failed", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
