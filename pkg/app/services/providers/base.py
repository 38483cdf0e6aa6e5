"""
Provider abstractions: the uniform contract every text-generation and
embedding backend implements.

Concrete backends only implement the transport (_complete / _embed). Prompt
rendering, output budgets, token/time accounting and input validation happen
here, so scripted and HTTP backends account for cost identically.

All providers are safe to call from many worker threads at once: backends hold
no per-call state and the CostMeter serializes its updates.
"""

import abc
import logging
import threading
import time
from dataclasses import dataclass
from typing import Callable, TypeVar

import numpy as np

from app.config.prompt_loader import load_prompt, render_prompt
from app.schemas.cost import (
    ZERO_COST,
    CostReport,
    Generation,
    GenerationRequest,
    merge_costs,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")


class ProviderError(Exception):
    """Base class for provider failures."""


class ProviderTransportError(ProviderError):
    """Raised when a backend stays unreachable after every retry."""

    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class FixtureMissError(ProviderError):
    """Raised by scripted providers when no fixture matches a request."""

    def __init__(self, template_id: str, variables: dict[str, str]):
        super().__init__(
            f"No scripted fixture for template '{template_id}' "
            f"with variables {sorted(variables)}"
        )
        self.template_id = template_id


class EmptyInputError(ProviderError, ValueError):
    """Raised when embed() is called with no texts."""


def whitespace_tokens(text: str) -> int:
    return len(text.split())


def with_retry(
    call: Callable[[], T],
    *,
    attempts: int = 3,
    backoff: float = 1.0,
    should_retry: Callable[[Exception], bool] = lambda exc: True,
    label: str = "provider call",
) -> T:
    """
    Run call() up to `attempts` times with exponential backoff
    (backoff, 2·backoff, 4·backoff, …) between tries.

    Raises ProviderTransportError carrying the attempt count once retries are
    exhausted; errors rejected by should_retry propagate immediately.
    """
    last_exc: Exception | None = None
    for attempt in range(1, attempts + 1):
        try:
            return call()
        except Exception as exc:
            if not should_retry(exc):
                raise
            last_exc = exc
            if attempt < attempts:
                delay = backoff * (2 ** (attempt - 1))
                logger.warning(
                    "%s failed (attempt %d/%d): %s; retrying in %.1fs",
                    label,
                    attempt,
                    attempts,
                    exc,
                    delay,
                )
                time.sleep(delay)
    raise ProviderTransportError(f"{label} failed: {last_exc}", attempts) from last_exc


class CostMeter:
    """Running cost total shared by concurrent callers."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._total = ZERO_COST

    def add(self, report: CostReport) -> None:
        with self._lock:
            self._total = merge_costs(self._total, report)

    @property
    def total(self) -> CostReport:
        with self._lock:
            return self._total

    def reset(self) -> None:
        with self._lock:
            self._total = ZERO_COST


@dataclass(frozen=True)
class Completion:
    text: str
    prompt_tokens: int
    completion_tokens: int


@dataclass(frozen=True)
class EmbeddingBatch:
    vectors: np.ndarray  # shape (len(texts), dimension)
    cost: CostReport


class GenerationProvider(abc.ABC):
    """Realizes the frozen LLM: template id + variables in, text out."""

    name: str = "generation"
    # Scripted backends report zero wall time so whole runs stay reproducible
    measures_time: bool = True

    def __init__(self, prompt_set: str = "default") -> None:
        self.prompt_set = prompt_set
        self.meter = CostMeter()

    def generate(self, request: GenerationRequest) -> Generation:
        variables = dict(request.variables)
        system, user = render_prompt(request.template_id, variables, self.prompt_set)
        max_output = (
            request.max_output
            or load_prompt(request.template_id, self.prompt_set)["max_tokens"]
        )

        started = time.perf_counter()
        completion = self._complete(request, system, user, max_output)
        elapsed = time.perf_counter() - started if self.measures_time else 0.0

        cost = CostReport(
            prompt_tokens=completion.prompt_tokens,
            completion_tokens=completion.completion_tokens,
            llm_calls=1,
            wall_time=elapsed,
        )
        self.meter.add(cost)
        logger.debug(
            "%s generated %s (%d→%d tokens)",
            self.name,
            request.template_id,
            cost.prompt_tokens,
            cost.completion_tokens,
        )
        return Generation(text=completion.text, prompt=user, cost=cost)

    @abc.abstractmethod
    def _complete(
        self, request: GenerationRequest, system: str, user: str, max_output: int
    ) -> Completion:
        """Send the rendered prompt to the backend."""


class EmbeddingProvider(abc.ABC):
    """Maps texts to fixed-dimension real vectors."""

    name: str = "embedding"
    measures_time: bool = True

    def __init__(self, dimension: int) -> None:
        if dimension < 1:
            raise ValueError(f"Embedding dimension must be positive, got {dimension}")
        self.dimension = dimension
        self.meter = CostMeter()

    def embed(self, texts: list[str]) -> EmbeddingBatch:
        if not texts:
            raise EmptyInputError("embed() requires at least one text")

        started = time.perf_counter()
        vectors, prompt_tokens = self._embed(list(texts))
        elapsed = time.perf_counter() - started if self.measures_time else 0.0

        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.shape != (len(texts), self.dimension):
            raise ProviderError(
                f"{self.name} returned shape {vectors.shape}, "
                f"expected {(len(texts), self.dimension)}"
            )
        if not np.all(np.isfinite(vectors)):
            raise ProviderError(f"{self.name} returned non-finite embedding values")

        cost = CostReport(
            prompt_tokens=prompt_tokens, embedding_calls=1, wall_time=elapsed
        )
        self.meter.add(cost)
        return EmbeddingBatch(vectors=vectors, cost=cost)

    @abc.abstractmethod
    def _embed(self, texts: list[str]) -> tuple[np.ndarray, int]:
        """Return (vectors, prompt token count) for the texts."""
