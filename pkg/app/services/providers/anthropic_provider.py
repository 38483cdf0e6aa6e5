"""
Anthropic-backed generation provider.

The SDK's own retry loop is disabled (max_retries=0) so every backend shares
the same policy from with_retry(): 3 attempts, exponential backoff, then
ProviderTransportError. Only transient failures are retried: connection
errors, timeouts, rate limits and 5xx responses. Bad requests fail fast.
"""

import logging

import anthropic

from app.schemas.cost import GenerationRequest
from app.services.providers.base import Completion, GenerationProvider, with_retry

logger = logging.getLogger(__name__)

_TRANSIENT_ERRORS = (
    anthropic.APIConnectionError,  # includes APITimeoutError
    anthropic.RateLimitError,
    anthropic.InternalServerError,
)


class AnthropicGenerationProvider(GenerationProvider):
    name = "anthropic"

    def __init__(
        self,
        api_key: str,
        model: str,
        base_url: str = "",
        prompt_set: str = "default",
        max_attempts: int = 3,
        backoff: float = 1.0,
    ) -> None:
        super().__init__(prompt_set=prompt_set)
        if not api_key:
            raise ValueError(
                "ANTHROPIC_API_KEY is not set; configure it or use backend=scripted"
            )
        client_kwargs: dict = {"api_key": api_key, "max_retries": 0}
        if base_url:
            client_kwargs["base_url"] = base_url
        self._client = anthropic.Anthropic(**client_kwargs)
        self.model = model
        self.max_attempts = max_attempts
        self.backoff = backoff

    def _complete(
        self, request: GenerationRequest, system: str, user: str, max_output: int
    ) -> Completion:
        create_kwargs: dict = {
            "model": self.model,
            "max_tokens": max_output,
            "messages": [{"role": "user", "content": user}],
        }
        if system:
            create_kwargs["system"] = system

        message = with_retry(
            lambda: self._client.messages.create(**create_kwargs),
            attempts=self.max_attempts,
            backoff=self.backoff,
            should_retry=lambda exc: isinstance(exc, _TRANSIENT_ERRORS),
            label=f"anthropic {request.template_id}",
        )
        text = "".join(
            block.text for block in message.content if getattr(block, "type", "") == "text"
        )
        return Completion(
            text=text.strip(),
            prompt_tokens=message.usage.input_tokens,
            completion_tokens=message.usage.output_tokens,
        )
