"""
Retrieval agent: decompose, retrieve on all four routes, fuse, reason.

Agent loop (at most max_iters iterations, history carried between them):
  1. decompose the question against the schema, conditioned on history
  2. embed the sub-queries (one batched call) and run every route for every
     sub-query in parallel
  3. fuse with reciprocal-rank fusion, truncate to top_k
  4. reason_reflect over the fused context; the first reply line is the
     verdict: ANSWER ends the loop, REFINE adds the new focus to history,
     INSUFFICIENT (or anything unparseable) moves on. An iteration with no
     retrieved context is INSUFFICIENT without a reasoning call.
If no iteration answers, finalization depends on the mode:
  open    the answer_open template is sent with the last context
  reject  the answer is ABSTENTION_SENTINEL; the rendered answer_reject
          prompt is kept in the trace but not sent

The single-pass variant (answer_no_agent) runs steps 1-3 once and then sends
the mode's answer template directly. In reject mode an empty context
abstains without a call, and a reply that declines to answer is mapped to
the sentinel.
"""

import logging
import re
from typing import Optional

import numpy as np

from app.config.pipeline_config import RetrievalConfig
from app.config.prompt_loader import render_prompt
from app.schemas.cost import ZERO_COST, CostReport, GenerationRequest, MergeMode, merge_costs, sum_costs
from app.schemas.graph_schema import Schema
from app.schemas.retrieval import (
    ABSTENTION_SENTINEL,
    AgentTrace,
    AnswerMode,
    ContextItem,
    Iteration,
    Route,
    RouteResult,
    SubQuery,
    Verdict,
)
from app.services.graph.store import Graph
from app.services.knowledge_tree.builder import KnowledgeTree
from app.services.providers.base import EmbeddingProvider, GenerationProvider
from app.services.retrieval.decomposer import decompose_query
from app.services.retrieval.fusion import fuse_results, render_context
from app.services.retrieval.routes import community_filter, entity_match, path_traverse, triple_match
from app.workers.pool import run_ordered, unwrap_all

logger = logging.getLogger(__name__)

_VERDICT_RE = re.compile(r"^(ANSWER|REFINE)\s*:\s*(.*)$", re.IGNORECASE)
_INSUFFICIENT_RE = re.compile(r"^INSUFFICIENT\b", re.IGNORECASE)
_REJECTION_RE = re.compile(
    r"\b(reject(?:ed)? to answer|insufficient|cannot answer|can't answer|unable to answer|not enough)\b",
    re.IGNORECASE,
)

ANSWER_TEMPLATES = {AnswerMode.OPEN: "answer_open", AnswerMode.REJECT: "answer_reject"}


def parse_verdict(text: str) -> tuple[Verdict, str, str]:
    """Returns (verdict, answer-or-focus text, remaining reasoning)."""
    lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if not lines:
        logger.warning("Empty reasoning reply; treating as insufficient")
        return Verdict.INSUFFICIENT, "", ""
    first, reasoning = lines[0], "\n".join(lines[1:])
    match = _VERDICT_RE.match(first)
    if match and match.group(2).strip():
        verdict = Verdict.ANSWER if match.group(1).upper() == "ANSWER" else Verdict.REFINE
        return verdict, match.group(2).strip(), reasoning
    if _INSUFFICIENT_RE.match(first):
        return Verdict.INSUFFICIENT, "", reasoning
    logger.warning("Malformed verdict line %r; treating as insufficient", first[:80])
    return Verdict.INSUFFICIENT, "", "\n".join(lines)


def is_rejection(answer: str) -> bool:
    stripped = answer.strip()
    return not stripped or stripped == ABSTENTION_SENTINEL or bool(_REJECTION_RE.search(stripped))


class Retriever:
    def __init__(
        self,
        graph: Graph,
        tree: KnowledgeTree,
        schema: Schema,
        generation: GenerationProvider,
        embedding: EmbeddingProvider,
        params: Optional[RetrievalConfig] = None,
    ):
        self.graph = graph
        self.tree = tree
        self.schema = schema
        self.generation = generation
        self.embedding = embedding
        self.params = params or RetrievalConfig()

    # ── Retrieval ─────────────────────────────────────────────────────────────

    def embed_queries(self, sub_queries: list[SubQuery]) -> tuple[dict[str, np.ndarray], CostReport]:
        texts = sorted({sq.text for sq in sub_queries})
        batch = self.embedding.embed(texts)
        return dict(zip(texts, batch.vectors)), batch.cost

    def _run_route(self, task: tuple[SubQuery, Route, np.ndarray, int]) -> RouteResult:
        sub_query, route, vector, k = task
        if route == Route.ENTITY:
            return entity_match(sub_query, vector, self.tree, self.graph, k)
        if route == Route.TRIPLE:
            return triple_match(sub_query, vector, self.tree, self.graph, k)
        if route == Route.COMMUNITY:
            return community_filter(sub_query, vector, self.tree, self.graph, k)
        return path_traverse(
            sub_query,
            vector,
            self.tree,
            self.graph,
            k,
            max_depth=self.params.max_depth,
            fanout_cap=self.params.fanout_cap,
            seed_count=self.params.path_seed_count,
            max_paths=self.params.max_paths,
        )

    def retrieve(
        self, sub_queries: list[SubQuery], top_k: int
    ) -> tuple[list[RouteResult], list[ContextItem], CostReport]:
        vectors, cost = self.embed_queries(sub_queries)
        route_k = self.params.route_top_k or top_k
        tasks = [(sq, route, vectors[sq.text], route_k) for sq in sub_queries for route in Route]
        results = unwrap_all(
            run_ordered(self._run_route, tasks, workers=self.params.workers, label="routes")
        )
        context = fuse_results(results, top_k, self.params.rrf_constant)
        return results, context, cost

    # ── Answering ─────────────────────────────────────────────────────────────

    def _answer_prompt(self, mode: AnswerMode, question: str, context: list[ContextItem]) -> tuple[str, dict]:
        template_id = ANSWER_TEMPLATES[mode]
        variables = {"query": question, "context": render_context(context)}
        return template_id, variables

    def _finalize_insufficient(
        self, trace: AgentTrace, question: str, context: list[ContextItem]
    ) -> CostReport:
        template_id, variables = self._answer_prompt(trace.mode, question, context)
        if trace.mode == AnswerMode.REJECT:
            _, trace.final_prompt = render_prompt(template_id, variables, self.generation.prompt_set)
            trace.final_prompt_sent = False
            trace.final_answer = ABSTENTION_SENTINEL
            return ZERO_COST
        generation = self.generation.generate(GenerationRequest(template_id=template_id, variables=variables))
        trace.final_prompt = generation.prompt
        trace.final_prompt_sent = True
        trace.final_answer = generation.text.strip()
        return generation.cost

    def agent_answer(
        self, question: str, mode: AnswerMode, top_k: Optional[int] = None
    ) -> tuple[str, AgentTrace]:
        top_k = top_k or self.params.top_k
        trace = AgentTrace(question=question, mode=mode, agent=True)
        costs: list[CostReport] = []
        history: list[str] = []
        context: list[ContextItem] = []

        for step in range(1, self.params.max_iters + 1):
            sub_queries, cost = decompose_query(
                question, self.schema, self.generation, self.params.max_subqueries, "\n".join(history)
            )
            costs.append(cost)
            results, context, cost = self.retrieve(sub_queries, top_k)
            costs.append(cost)
            iteration = Iteration(step=step, sub_queries=sub_queries, route_results=results, context=context)

            if context:
                generation = self.generation.generate(
                    GenerationRequest(
                        template_id="reason_reflect",
                        variables={
                            "question": question,
                            "context": render_context(context),
                            "history": "\n".join(history) or "(none)",
                        },
                    )
                )
                costs.append(generation.cost)
                iteration.verdict, iteration.verdict_text, iteration.reasoning = parse_verdict(generation.text)
            else:
                iteration.reasoning = "no evidence retrieved"
            trace.iterations.append(iteration)

            if iteration.verdict == Verdict.ANSWER:
                trace.final_answer = iteration.verdict_text
                break
            focus = (
                f"refine: {iteration.verdict_text}"
                if iteration.verdict == Verdict.REFINE
                else "evidence insufficient"
            )
            asked = "; ".join(sq.text for sq in sub_queries)
            history.append(f"Step {step}: asked [{asked}]; {focus}")
        else:
            costs.append(self._finalize_insufficient(trace, question, context))

        trace.cost = sum_costs(costs, MergeMode.SEQUENTIAL)
        logger.info(
            "Agent answered in %d iterations (%s mode, abstained=%s)",
            len(trace.iterations),
            mode.value,
            trace.abstained,
        )
        return trace.final_answer, trace

    def answer_no_agent(
        self, question: str, mode: AnswerMode, top_k: Optional[int] = None
    ) -> tuple[str, AgentTrace]:
        top_k = top_k or self.params.top_k
        trace = AgentTrace(question=question, mode=mode, agent=False)
        sub_queries, cost = decompose_query(question, self.schema, self.generation, self.params.max_subqueries)
        results, context, retrieve_cost = self.retrieve(sub_queries, top_k)
        total = merge_costs(cost, retrieve_cost)
        iteration = Iteration(step=1, sub_queries=sub_queries, route_results=results, context=context)

        if mode == AnswerMode.REJECT and not context:
            total = merge_costs(total, self._finalize_insufficient(trace, question, context))
        else:
            template_id, variables = self._answer_prompt(mode, question, context)
            generation = self.generation.generate(GenerationRequest(template_id=template_id, variables=variables))
            total = merge_costs(total, generation.cost)
            trace.final_prompt = generation.prompt
            trace.final_prompt_sent = True
            answer = generation.text.strip()
            if mode == AnswerMode.REJECT and is_rejection(answer):
                answer = ABSTENTION_SENTINEL
            trace.final_answer = answer

        if trace.final_answer == ABSTENTION_SENTINEL:
            iteration.verdict = Verdict.INSUFFICIENT
        else:
            iteration.verdict = Verdict.ANSWER
            iteration.verdict_text = trace.final_answer
        trace.iterations.append(iteration)
        trace.cost = total
        return trace.final_answer, trace


def agent_answer(
    question: str,
    tree: KnowledgeTree,
    graph: Graph,
    schema: Schema,
    generation: GenerationProvider,
    embedding: EmbeddingProvider,
    mode: AnswerMode,
    params: Optional[RetrievalConfig] = None,
) -> tuple[str, AgentTrace]:
    return Retriever(graph, tree, schema, generation, embedding, params).agent_answer(question, mode)


def answer_no_agent(
    question: str,
    tree: KnowledgeTree,
    graph: Graph,
    schema: Schema,
    generation: GenerationProvider,
    embedding: EmbeddingProvider,
    mode: AnswerMode,
    params: Optional[RetrievalConfig] = None,
) -> tuple[str, AgentTrace]:
    return Retriever(graph, tree, schema, generation, embedding, params).answer_no_agent(question, mode)
