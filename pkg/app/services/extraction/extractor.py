"""
Corpus extraction: documents in, schema-bounded graph out.

Pipeline steps:
  1. Split documents into chunks (fixed budget, sentence-snapped).
  2. Extract every chunk on the worker pool against the current schema.
     batch mode:  all chunks against the seed schema, then one expansion.
     online mode: documents in order, expansion after each document over
                  everything proposed so far.
  3. Abort if the share of failed chunks exceeds failure_rate_threshold;
     otherwise failed chunks are logged and skipped.
  4. If expansion accepted anything and reextract is on, chunks that had
     diverted lines are extracted once more against the expanded schema.
  5. Commit every chunk's facts serially, in chunk order, as one batch.

Per-chunk costs are merged as parallel work within a pass and sequentially
across passes.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

from app.config.pipeline_config import ExtractionConfig
from app.schemas.cost import ZERO_COST, CostReport, GenerationRequest, MergeMode, sum_costs
from app.schemas.extraction import Chunk, Document, ExtractionOutput, GraphBatch
from app.schemas.graph_schema import ExpansionCandidate, Schema
from app.services.extraction.chunker import chunk_corpus, chunk_document
from app.services.extraction.parser import parse_extraction
from app.services.graph.store import Graph
from app.services.providers.base import GenerationProvider
from app.services.schema.expansion import apply_expansion, pool_candidates
from app.workers.pool import run_ordered

logger = logging.getLogger(__name__)


class ExtractionAbortedError(Exception):
    """Raised when too many chunks fail for the run to be trusted."""

    def __init__(self, failed: int, total: int, threshold: float):
        super().__init__(
            f"Extraction aborted: {failed}/{total} chunks failed "
            f"(threshold {threshold:.0%})"
        )
        self.failed = failed
        self.total = total


@dataclass
class ExtractionStats:
    chunks: int = 0
    failed_chunks: list[str] = field(default_factory=list)
    lines_total: int = 0
    lines_dropped: int = 0
    lines_diverted: int = 0
    accepted_labels: list[str] = field(default_factory=list)
    reextracted_chunks: int = 0


@dataclass
class ExtractionRun:
    graph: Graph
    schema: Schema
    cost: CostReport
    stats: ExtractionStats


def extract_chunk(
    chunk: Chunk, schema: Schema, provider: GenerationProvider
) -> tuple[ExtractionOutput, CostReport]:
    if not chunk.text.strip():
        return ExtractionOutput(chunk_id=chunk.id), ZERO_COST
    generation = provider.generate(
        GenerationRequest(
            template_id="extract",
            variables={**schema.prompt_variables(), "text": chunk.text},
        )
    )
    return parse_extraction(generation.text, schema, chunk.id), generation.cost


class _Pass:
    """One extraction pass over a list of chunks."""

    def __init__(self, chunks: list[Chunk], schema: Schema, provider: GenerationProvider, workers: int):
        outcomes = run_ordered(
            lambda chunk: extract_chunk(chunk, schema, provider),
            chunks,
            workers=workers,
            label="extract",
        )
        self.outputs: dict[str, ExtractionOutput] = {}
        self.failed: list[str] = []
        costs = []
        for chunk, outcome in zip(chunks, outcomes):
            if outcome.ok:
                output, cost = outcome.value
                self.outputs[chunk.id] = output
                costs.append(cost)
            else:
                logger.warning("Chunk %s failed: %s", chunk.id, outcome.error)
                self.failed.append(chunk.id)
        self.cost = sum_costs(costs, MergeMode.PARALLEL)


def _proposals(chunks: list[Chunk], outputs: dict[str, ExtractionOutput]) -> list[tuple[str, ExpansionCandidate]]:
    return [
        (chunk.doc_id, candidate)
        for chunk in chunks
        if chunk.id in outputs
        for candidate in outputs[chunk.id].candidates
    ]


def extract_corpus(
    documents: list[Document],
    seed_schema: Schema,
    provider: GenerationProvider,
    params: Optional[ExtractionConfig] = None,
) -> ExtractionRun:
    params = params or ExtractionConfig()
    if not documents:
        raise ValueError("extract_corpus needs at least one document")

    chunks = chunk_corpus(documents, params.chunk_size)
    stats = ExtractionStats(chunks=len(chunks))
    logger.info("Extracting %d chunks from %d documents", len(chunks), len(documents))

    schema = seed_schema
    outputs: dict[str, ExtractionOutput] = {}
    costs: list[CostReport] = []
    accepted: list[ExpansionCandidate] = []

    if params.expansion_mode == "online":
        proposals: list[tuple[str, ExpansionCandidate]] = []
        for document in documents:
            doc_chunks = chunk_document(document, params.chunk_size)
            run = _Pass(doc_chunks, schema, provider, params.workers)
            outputs.update(run.outputs)
            stats.failed_chunks.extend(run.failed)
            costs.append(run.cost)
            proposals.extend(_proposals(doc_chunks, run.outputs))
            if params.expand_schema:
                result = apply_expansion(schema, pool_candidates(proposals), params.mu, params.min_support)
                schema = result.schema
                accepted.extend(result.accepted)
    else:
        run = _Pass(chunks, schema, provider, params.workers)
        outputs.update(run.outputs)
        stats.failed_chunks.extend(run.failed)
        costs.append(run.cost)
        if params.expand_schema:
            result = apply_expansion(
                schema, pool_candidates(_proposals(chunks, outputs)), params.mu, params.min_support
            )
            schema = result.schema
            accepted.extend(result.accepted)

    if chunks and len(stats.failed_chunks) / len(chunks) > params.failure_rate_threshold:
        raise ExtractionAbortedError(len(stats.failed_chunks), len(chunks), params.failure_rate_threshold)

    if accepted and params.reextract:
        retry = [chunk for chunk in chunks if chunk.id in outputs and outputs[chunk.id].lines_diverted]
        if retry:
            logger.info("Re-extracting %d chunks against schema v%d", len(retry), schema.version)
            second = _Pass(retry, schema, provider, params.workers)
            outputs.update(second.outputs)
            costs.append(second.cost)
            stats.reextracted_chunks = len(second.outputs)

    graph = Graph(schema=schema)
    batch = GraphBatch()
    for chunk in chunks:
        output = outputs.get(chunk.id)
        if output is None:
            batch.chunks[chunk.id] = chunk.text
            continue
        batch.add_output(output, chunk.text)
        stats.lines_total += output.lines_total
        stats.lines_dropped += output.lines_dropped
        stats.lines_diverted += output.lines_diverted
    graph.commit(batch)

    stats.accepted_labels = [f"{c.kind.value}:{c.label}" for c in accepted]
    cost = sum_costs(costs, MergeMode.SEQUENTIAL)
    logger.info(
        "Extraction complete: %d entities, %d triples, schema v%d, %d failed chunks",
        len(graph.entities),
        len(graph.triples),
        schema.version,
        len(stats.failed_chunks),
    )
    return ExtractionRun(graph=graph, schema=schema, cost=cost, stats=stats)
