"""
Build pipeline: corpus and seed schema in, persisted graph + knowledge tree out.

Pipeline steps:
  1. Load the seed schema and the corpus (paths from the pipeline config)
  2. Extract the corpus into a schema-bounded graph, expanding the schema
  3. Detect communities over the graph
  4. Summarize communities, insert community nodes, build the indexes
  5. Persist into the artifacts directory:
       graph.jsonl  schema.yaml  tree.jsonl  indexes/<kind>.vec  cost.json
  6. Log the per-stage and total CostReport

A failure in any stage is raised as StageError naming the stage; the
artifacts directory is only written once every stage has succeeded.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from app.config.pipeline_config import ConfigError, PipelineConfig
from app.schemas.cost import CostReport, MergeMode, sum_costs
from app.schemas.graph_schema import Schema
from app.services.embeddings.vectors import EmbeddingCache
from app.services.evaluation.datasets import load_corpus
from app.services.extraction.extractor import ExtractionStats, extract_corpus
from app.services.community.detector import detect_communities
from app.services.graph.persistence import load_graph, save_graph
from app.services.graph.store import Graph
from app.services.knowledge_tree.builder import KnowledgeTree, build_tree
from app.services.knowledge_tree.persistence import TREE_FILE, load_tree, save_tree
from app.services.providers.factory import ProviderSet, get_providers
from app.services.schema.loader import load_schema, save_schema

logger = logging.getLogger(__name__)

GRAPH_FILE = "graph.jsonl"
SCHEMA_FILE = "schema.yaml"
COST_FILE = "cost.json"


class StageError(Exception):
    """A pipeline stage failed; `stage` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class BuildResult:
    graph: Graph
    schema: Schema
    tree: KnowledgeTree
    stage_costs: dict[str, CostReport] = field(default_factory=dict)
    stats: Optional[ExtractionStats] = None
    files: list[Path] = field(default_factory=list)

    @property
    def cost(self) -> CostReport:
        return sum_costs(list(self.stage_costs.values()), MergeMode.SEQUENTIAL)


@dataclass
class Artifacts:
    graph: Graph
    schema: Schema
    tree: KnowledgeTree


def _require(path: Optional[str], what: str) -> Path:
    if not path:
        raise ConfigError(f"No {what} path configured")
    resolved = Path(path)
    if not resolved.exists():
        raise ConfigError(f"{what.capitalize()} file not found: {resolved}")
    return resolved


def run_build(config: PipelineConfig, providers: Optional[ProviderSet] = None) -> BuildResult:
    schema_path = _require(config.paths.schema_path, "schema")
    corpus_path = _require(config.paths.corpus, "corpus")
    providers = providers or get_providers(config)
    params = config.detection_params

    stage = "load"
    try:
        seed_schema = load_schema(schema_path)
        documents = load_corpus(corpus_path)

        stage = "extraction"
        run = extract_corpus(documents, seed_schema, providers.generation, config.extraction)
        graph, schema = run.graph, run.schema

        stage = "community detection"
        cache = EmbeddingCache(providers.embedding)
        communities = detect_communities(graph, cache, params)
        detection_cost = cache.cost

        stage = "knowledge tree"
        tree, summary_cost = build_tree(
            graph, communities, providers.generation, cache, params, workers=config.extraction.workers
        )
    except Exception as exc:
        logger.error("Build stage %r failed: %s", stage, exc)
        raise StageError(stage, exc) from exc

    result = BuildResult(
        graph=graph,
        schema=schema,
        tree=tree,
        stage_costs={
            "extraction": run.cost,
            "detection_embeddings": detection_cost,
            "summaries": summary_cost,
            "index_embeddings": _delta(cache.cost, detection_cost),
        },
        stats=run.stats,
    )

    try:
        result.files = persist_build(result, Path(config.paths.artifacts))
    except OSError as exc:
        raise StageError("persist", exc) from exc

    total = result.cost
    logger.info(
        "Build complete: %d prompt + %d completion tokens, %d LLM calls, %d embedding calls",
        total.prompt_tokens,
        total.completion_tokens,
        total.llm_calls,
        total.embedding_calls,
    )
    return result


def _delta(after: CostReport, before: CostReport) -> CostReport:
    return CostReport(
        prompt_tokens=after.prompt_tokens - before.prompt_tokens,
        completion_tokens=after.completion_tokens - before.completion_tokens,
        llm_calls=after.llm_calls - before.llm_calls,
        embedding_calls=after.embedding_calls - before.embedding_calls,
        wall_time=max(0.0, after.wall_time - before.wall_time),
    )


def cost_summary(result: BuildResult) -> dict:
    return {
        "stages": {name: cost.model_dump() for name, cost in result.stage_costs.items()},
        "total": result.cost.model_dump(),
    }


def persist_build(result: BuildResult, directory: Path) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    files = [
        save_graph(result.graph, directory / GRAPH_FILE),
        save_schema(result.schema, directory / SCHEMA_FILE),
    ]
    files.extend(save_tree(result.tree, directory))
    cost_path = directory / COST_FILE
    cost_path.write_text(json.dumps(cost_summary(result), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    files.append(cost_path)
    return files


def load_artifacts(directory: Path) -> Artifacts:
    """Reload a build; raises ConfigError naming the first missing file."""
    for name in (GRAPH_FILE, SCHEMA_FILE, TREE_FILE):
        if not (directory / name).exists():
            raise ConfigError(f"Missing build artifact {directory / name}; run the build command first")
    schema = load_schema(directory / SCHEMA_FILE)
    graph = load_graph(directory / GRAPH_FILE, schema=schema)
    tree = load_tree(directory, graph)
    return Artifacts(graph=graph, schema=schema, tree=tree)
