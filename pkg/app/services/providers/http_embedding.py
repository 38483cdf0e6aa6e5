"""
HTTP embedding provider for any OpenAI-compatible /embeddings endpoint.

Request:  POST {base_url}/embeddings  {"model": ..., "input": [texts]}
Response: {"data": [{"index": i, "embedding": [...]}, ...],
           "usage": {"prompt_tokens": n}}   # usage optional

Connection errors, 429 and 5xx are retried (3 attempts, exponential backoff);
other 4xx responses fail immediately.
"""

import logging

import httpx
import numpy as np

from app.services.providers.base import (
    EmbeddingProvider,
    ProviderError,
    whitespace_tokens,
    with_retry,
)

logger = logging.getLogger(__name__)


def _is_transient(exc: Exception) -> bool:
    if isinstance(exc, httpx.TransportError):
        return True
    if isinstance(exc, httpx.HTTPStatusError):
        status = exc.response.status_code
        return status == 429 or status >= 500
    return False


class HttpEmbeddingProvider(EmbeddingProvider):
    name = "http-embedding"

    def __init__(
        self,
        base_url: str,
        model: str,
        dimension: int,
        api_key: str = "",
        timeout: float = 30.0,
        max_attempts: int = 3,
        backoff: float = 1.0,
    ) -> None:
        super().__init__(dimension)
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(base_url=base_url, headers=headers, timeout=timeout)
        self.model = model
        self.max_attempts = max_attempts
        self.backoff = backoff

    def _post(self, texts: list[str]) -> dict:
        response = self._client.post(
            "/embeddings", json={"model": self.model, "input": texts}
        )
        response.raise_for_status()
        return response.json()

    def _embed(self, texts: list[str]) -> tuple[np.ndarray, int]:
        payload = with_retry(
            lambda: self._post(texts),
            attempts=self.max_attempts,
            backoff=self.backoff,
            should_retry=_is_transient,
            label=f"embeddings ({len(texts)} texts)",
        )
        try:
            rows = sorted(payload["data"], key=lambda row: row["index"])
            vectors = np.asarray([row["embedding"] for row in rows], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderError(f"Malformed embeddings response: {exc}") from exc

        usage = payload.get("usage") or {}
        tokens = usage.get("prompt_tokens")
        if tokens is None:
            tokens = sum(whitespace_tokens(text) for text in texts)
        return vectors, int(tokens)
