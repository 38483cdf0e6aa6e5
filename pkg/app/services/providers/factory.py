"""
Provider factory: swap scripted fixtures for live backends by editing the
pipeline config's providers section; no code changes.
"""

import logging
from dataclasses import dataclass

from app.config.pipeline_config import (
    ConfigError,
    EmbeddingBackendConfig,
    GenerationBackendConfig,
    PipelineConfig,
)
from app.services.providers.base import EmbeddingProvider, GenerationProvider

logger = logging.getLogger(__name__)


@dataclass
class ProviderSet:
    generation: GenerationProvider
    judge: GenerationProvider
    embedding: EmbeddingProvider


def build_generation_provider(cfg: GenerationBackendConfig) -> GenerationProvider:
    from app.settings import settings

    if cfg.backend == "scripted":
        from app.services.providers.scripted import ScriptedGenerationProvider

        fixtures_dir = cfg.fixtures_dir or settings.scripted_fixtures_dir
        if not fixtures_dir:
            return ScriptedGenerationProvider(prompt_set=cfg.prompt_set)
        return ScriptedGenerationProvider.from_directory(
            fixtures_dir, prompt_set=cfg.prompt_set
        )
    elif cfg.backend == "anthropic":
        # imported lazily so scripted runs never touch the SDK
        from app.services.providers.anthropic_provider import AnthropicGenerationProvider

        try:
            return AnthropicGenerationProvider(
                api_key=settings.anthropic_api_key,
                model=cfg.model or settings.generation_model,
                base_url=cfg.base_url or settings.anthropic_base_url,
                prompt_set=cfg.prompt_set,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        raise ConfigError(f"Unknown generation backend: {cfg.backend!r}")


def build_embedding_provider(cfg: EmbeddingBackendConfig, seed: int) -> EmbeddingProvider:
    from app.settings import settings

    if cfg.backend == "scripted":
        from app.services.providers.scripted import ScriptedEmbeddingProvider

        return ScriptedEmbeddingProvider(dimension=cfg.dimension, seed=seed)
    elif cfg.backend == "http":
        from app.services.providers.http_embedding import HttpEmbeddingProvider

        return HttpEmbeddingProvider(
            base_url=cfg.base_url or settings.embedding_base_url,
            model=cfg.model or settings.embedding_model,
            dimension=cfg.dimension,
            api_key=settings.embedding_api_key,
        )
    else:
        raise ConfigError(f"Unknown embedding backend: {cfg.backend!r}")


def get_providers(config: PipelineConfig) -> ProviderSet:
    """Return the configured generation, judge and embedding backends."""
    generation = build_generation_provider(config.providers.generation)
    judge_cfg = config.providers.judge
    judge = generation if judge_cfg is None else build_generation_provider(judge_cfg)
    embedding = build_embedding_provider(config.providers.embedding, config.seed)
    logger.info(
        "Providers: generation=%s judge=%s embedding=%s (d=%d)",
        generation.name,
        judge.name,
        embedding.name,
        embedding.dimension,
    )
    return ProviderSet(generation=generation, judge=judge, embedding=embedding)
