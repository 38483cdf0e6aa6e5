"""
Provider tests: scripted fixtures, embedding determinism, retry policy,
cost accounting and the factory.
"""

import httpx
import numpy as np
import pytest

from app.config.pipeline_config import ConfigError, EmbeddingBackendConfig, GenerationBackendConfig, PipelineConfig
from app.config.prompt_loader import TemplateVariableError, UnknownTemplateError, render_prompt, template_variables
from app.schemas.cost import CostReport, GenerationRequest, MergeMode, merge_costs
from app.services.providers.base import (
    EmptyInputError,
    FixtureMissError,
    ProviderError,
    ProviderTransportError,
    with_retry,
)
from app.services.providers.factory import build_embedding_provider, build_generation_provider, get_providers
from app.services.providers.http_embedding import HttpEmbeddingProvider
from app.services.providers.scripted import ScriptedEmbeddingProvider, ScriptedGenerationProvider
from app.workers.pool import run_ordered

JUDGE_VARS = {"question": "q", "gold": "Paris", "predicted": "Paris"}


class TestPromptTemplates:
    @pytest.mark.parametrize(
        "template_id,expected",
        [
            ("judge", {"question", "gold", "predicted"}),
            ("answer_open", {"query", "context"}),
            ("answer_reject", {"query", "context"}),
            ("summarize_community", {"members"}),
        ],
    )
    def test_template_variables(self, template_id, expected):
        assert template_variables(template_id) == expected

    def test_unbound_variable_named(self):
        with pytest.raises(TemplateVariableError, match="predicted"):
            render_prompt("judge", {"question": "q", "gold": "g"})

    def test_unknown_template(self):
        with pytest.raises(UnknownTemplateError):
            render_prompt("nonexistent", {})

    def test_reject_prompt_wording(self):
        _, user = render_prompt("answer_reject", {"query": "Who?", "context": "[1] x"})
        assert user == (
            "Given the question and the extracted knowledge from different retrieval paths, "
            "please answer the question below.\n"
            "If the extracted knowledge is not enough to answer, please reject to answer.\n\n"
            "Question: Who?\n\nExtracted Knowledge:\n[1] x\n\nAnswer:"
        )


class TestScriptedGeneration:
    def test_most_specific_fixture_wins(self, generation):
        generation.register("judge", "INCORRECT")
        generation.register("judge", "CORRECT", predicted="Paris")
        generation.register("judge", "CORRECT", predicted="Paris", gold="Paris")
        generation.register("judge", "never", gold="Rome")
        assert generation.generate(GenerationRequest(template_id="judge", variables=JUDGE_VARS)).text == "CORRECT"
        other = {**JUDGE_VARS, "predicted": "Lyon"}
        assert generation.generate(GenerationRequest(template_id="judge", variables=other)).text == "INCORRECT"

    def test_match_canonicalizes_whitespace(self, generation):
        generation.register("judge", "CORRECT", predicted="New   York")
        variables = {**JUDGE_VARS, "predicted": " New York "}
        assert generation.generate(GenerationRequest(template_id="judge", variables=variables)).text == "CORRECT"

    def test_miss_raises(self, generation):
        with pytest.raises(FixtureMissError):
            generation.generate(GenerationRequest(template_id="judge", variables=JUDGE_VARS))

    def test_response_list_walks_then_repeats(self, generation):
        generation.register("judge", ["A", "B"])
        texts = [
            generation.generate(GenerationRequest(template_id="judge", variables=JUDGE_VARS)).text
            for _ in range(3)
        ]
        assert texts == ["A", "B", "B"]

    def test_cursor_by_keeps_one_walk_per_question(self, generation):
        generation.register("judge", ["first", "second"], cursor_by=["question"])

        def ask(question: str) -> str:
            variables = {**JUDGE_VARS, "question": question}
            return generation.generate(GenerationRequest(template_id="judge", variables=variables)).text

        assert [ask("q1"), ask("q2"), ask("q1"), ask("q2 "), ask("q3")] == [
            "first", "first", "second", "second", "first",
        ]

    def test_cursor_by_independent_of_scheduling(self, generation):
        generation.register("judge", ["first", "second"], cursor_by=["question"])

        def conversation(question: str) -> list[str]:
            variables = {**JUDGE_VARS, "question": question}
            return [
                generation.generate(GenerationRequest(template_id="judge", variables=variables)).text
                for _ in range(2)
            ]

        outcomes = run_ordered(conversation, [f"q{i}" for i in range(12)], workers=6)
        assert [outcome.value for outcome in outcomes] == [["first", "second"]] * 12

    def test_cursor_by_from_directory(self, tmp_path):
        (tmp_path / "judge.yaml").write_text(
            "- template_id: judge\n  cursor_by: [question]\n  response: [A, B]\n"
        )
        provider = ScriptedGenerationProvider.from_directory(tmp_path)
        texts = [
            provider.generate(GenerationRequest(template_id="judge", variables={**JUDGE_VARS, "question": q})).text
            for q in ("x", "y", "x")
        ]
        assert texts == ["A", "A", "B"]

    def test_calls_and_cost_recorded(self, generation):
        generation.register("judge", "CORRECT")
        result = generation.generate(GenerationRequest(template_id="judge", variables=JUDGE_VARS))
        assert len(generation.calls_for("judge")) == 1
        assert result.cost.llm_calls == 1
        assert result.cost.completion_tokens == 1
        assert result.cost.wall_time == 0.0
        assert generation.meter.total == result.cost
        assert "Gold answer: Paris" in result.prompt

    def test_from_directory(self, tmp_path):
        (tmp_path / "judge.yaml").write_text(
            "- template_id: judge\n  match:\n    predicted: Paris\n  response: CORRECT\n"
        )
        provider = ScriptedGenerationProvider.from_directory(tmp_path)
        assert provider.generate(GenerationRequest(template_id="judge", variables=JUDGE_VARS)).text == "CORRECT"


class TestScriptedEmbedding:
    def test_same_text_same_vector_across_instances(self):
        a = ScriptedEmbeddingProvider(dimension=8, seed=7).embed(["aspirin"]).vectors
        b = ScriptedEmbeddingProvider(dimension=8, seed=7).embed(["aspirin"]).vectors
        assert np.array_equal(a, b)

    def test_seed_changes_vectors(self):
        a = ScriptedEmbeddingProvider(dimension=8, seed=1).vector_for("aspirin")
        b = ScriptedEmbeddingProvider(dimension=8, seed=2).vector_for("aspirin")
        assert not np.array_equal(a, b)

    def test_pinned_vector(self):
        provider = ScriptedEmbeddingProvider(dimension=3, vectors={"x": [1.0, 0.0, 0.0]})
        assert provider.embed(["x"]).vectors.tolist() == [[1.0, 0.0, 0.0]]

    def test_pinned_vector_shape_checked(self):
        with pytest.raises(ValueError):
            ScriptedEmbeddingProvider(dimension=3, vectors={"x": [1.0, 0.0]})

    def test_empty_input(self, embedding):
        with pytest.raises(EmptyInputError):
            embedding.embed([])

    def test_embedding_calls_counted(self, embedding):
        batch = embedding.embed(["a b", "c"])
        assert batch.vectors.shape == (2, embedding.dimension)
        assert batch.cost.embedding_calls == 1
        assert batch.cost.prompt_tokens == 3


class TestRetry:
    def test_succeeds_after_transient_failures(self):
        attempts = []

        def flaky():
            attempts.append(1)
            if len(attempts) < 3:
                raise ConnectionError("down")
            return "ok"

        assert with_retry(flaky, attempts=3, backoff=0.0) == "ok"
        assert len(attempts) == 3

    def test_exhausted_retries_raise_transport_error(self):
        def down():
            raise ConnectionError("down")

        with pytest.raises(ProviderTransportError) as exc_info:
            with_retry(down, attempts=3, backoff=0.0)
        assert exc_info.value.attempts == 3

    def test_non_transient_propagates(self):
        def bad():
            raise ValueError("bad request")

        with pytest.raises(ValueError):
            with_retry(bad, attempts=3, backoff=0.0, should_retry=lambda exc: False)


class TestHttpEmbedding:
    def _provider(self, handler) -> HttpEmbeddingProvider:
        provider = HttpEmbeddingProvider(base_url="http://embed.test/v1", model="m", dimension=2, backoff=0.0)
        provider._client = httpx.Client(base_url="http://embed.test/v1", transport=httpx.MockTransport(handler))
        return provider

    def test_rows_ordered_by_index(self):
        def handler(request):
            return httpx.Response(
                200,
                json={
                    "data": [{"index": 1, "embedding": [0.0, 1.0]}, {"index": 0, "embedding": [1.0, 0.0]}],
                    "usage": {"prompt_tokens": 5},
                },
            )

        batch = self._provider(handler).embed(["a", "b"])
        assert batch.vectors.tolist() == [[1.0, 0.0], [0.0, 1.0]]
        assert batch.cost.prompt_tokens == 5

    def test_server_errors_retried(self):
        calls = []

        def handler(request):
            calls.append(1)
            if len(calls) == 1:
                return httpx.Response(503)
            return httpx.Response(200, json={"data": [{"index": 0, "embedding": [1.0, 0.0]}]})

        assert self._provider(handler).embed(["a"]).vectors.shape == (1, 2)
        assert len(calls) == 2

    def test_client_error_not_retried(self):
        calls = []

        def handler(request):
            calls.append(1)
            return httpx.Response(400)

        with pytest.raises(httpx.HTTPStatusError):
            self._provider(handler).embed(["a"])
        assert len(calls) == 1

    def test_wrong_dimension_rejected(self):
        def handler(request):
            return httpx.Response(200, json={"data": [{"index": 0, "embedding": [1.0, 0.0, 0.0]}]})

        with pytest.raises(ProviderError):
            self._provider(handler).embed(["a"])


class TestCostReport:
    def test_parallel_merge_takes_max_wall_time(self):
        a = CostReport(prompt_tokens=1, llm_calls=1, wall_time=2.0)
        b = CostReport(prompt_tokens=2, llm_calls=1, wall_time=3.0)
        assert merge_costs(a, b, MergeMode.PARALLEL).wall_time == 3.0
        assert merge_costs(a, b).wall_time == 5.0
        assert merge_costs(a, b).prompt_tokens == 3


class TestFactory:
    def test_scripted_defaults(self):
        providers = get_providers(PipelineConfig())
        assert isinstance(providers.generation, ScriptedGenerationProvider)
        assert providers.judge is providers.generation
        assert providers.embedding.dimension == 384

    def test_scripted_fixture_directory(self, tmp_path):
        (tmp_path / "f.yaml").write_text("- template_id: judge\n  response: CORRECT\n")
        provider = build_generation_provider(GenerationBackendConfig(backend="scripted", fixtures_dir=str(tmp_path)))
        assert provider.generate(GenerationRequest(template_id="judge", variables=JUDGE_VARS)).text == "CORRECT"

    def test_anthropic_without_key_is_config_error(self):
        with pytest.raises(ConfigError, match="ANTHROPIC_API_KEY"):
            build_generation_provider(GenerationBackendConfig(backend="anthropic"))

    def test_embedding_seed_flows_through(self):
        a = build_embedding_provider(EmbeddingBackendConfig(dimension=4), seed=1)
        b = build_embedding_provider(EmbeddingBackendConfig(dimension=4), seed=1)
        assert np.array_equal(a.vector_for("x"), b.vector_for("x"))
