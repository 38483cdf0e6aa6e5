"""
Pipeline configuration: one YAML file describing a build/query/eval run.

Environment-level secrets and endpoints stay in app.settings; this file holds
the knobs that change between experiments (detection, retrieval and
extraction parameters, artifact paths, the single seed). Values are range
checked on load so a bad config fails before any work starts. CLI flags are
applied with override(), which re-validates.

Example:
    seed: 42
    providers:
      generation: {backend: scripted, fixtures_dir: fixtures/demo}
      embedding:  {backend: scripted, dimension: 16}
    detection:  {semantic_weight: 0.5, merge_threshold: 0.1}
    retrieval:  {top_k: 20, max_iters: 3}
    extraction: {chunk_size: 1200, workers: 8, mu: 0.8}
    paths:
      schema_path: schemas/seed.yaml
      corpus: data/corpus.jsonl
      artifacts: artifacts/demo
"""

import logging
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from app.schemas.community import DetectionParams

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    """Raised when a pipeline config is missing, unparseable or out of range."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GenerationBackendConfig(_Section):
    backend: Literal["anthropic", "scripted"] = "scripted"
    model: Optional[str] = None  # None → settings.generation_model
    base_url: Optional[str] = None
    fixtures_dir: Optional[str] = None  # scripted only
    prompt_set: str = "default"


class EmbeddingBackendConfig(_Section):
    backend: Literal["http", "scripted"] = "scripted"
    model: Optional[str] = None
    base_url: Optional[str] = None
    dimension: int = Field(default=384, ge=1)


class ProvidersConfig(_Section):
    generation: GenerationBackendConfig = Field(default_factory=GenerationBackendConfig)
    judge: Optional[GenerationBackendConfig] = None  # None → same as generation
    embedding: EmbeddingBackendConfig = Field(default_factory=EmbeddingBackendConfig)


class DetectionConfig(_Section):
    semantic_weight: float = Field(default=0.5, ge=0.0)
    merge_threshold: float = Field(default=0.1, ge=0.0)
    granularity: int = Field(default=10, ge=1)
    max_clusters: int = Field(default=200, ge=2)
    n_init: int = Field(default=5, ge=1)
    max_merge_passes: int = Field(default=10, ge=0)
    include_attribute_edges: bool = True
    keywords_per_community: int = Field(default=5, ge=1)
    transform_path: Optional[str] = None  # whitespace-separated square matrix

    def to_params(self, seed: int) -> DetectionParams:
        transform = None
        if self.transform_path:
            path = Path(self.transform_path)
            if not path.exists():
                raise ConfigError(f"Transform matrix not found: {path}")
            transform = np.atleast_2d(np.loadtxt(path, dtype=np.float64))
        return DetectionParams(
            semantic_weight=self.semantic_weight,
            merge_threshold=self.merge_threshold,
            granularity=self.granularity,
            max_clusters=self.max_clusters,
            seed=seed,
            n_init=self.n_init,
            max_merge_passes=self.max_merge_passes,
            include_attribute_edges=self.include_attribute_edges,
            keywords_per_community=self.keywords_per_community,
            transform=transform,
        )


class RetrievalConfig(_Section):
    mode: Literal["open", "reject"] = "reject"
    use_agent: bool = True
    max_subqueries: int = Field(default=4, ge=1)
    top_k: int = Field(default=20, ge=1)
    route_top_k: Optional[int] = Field(default=None, ge=1)  # None → top_k
    max_iters: int = Field(default=3, ge=1)
    max_depth: int = Field(default=5, ge=1)
    fanout_cap: int = Field(default=8, ge=1)
    max_paths: int = Field(default=200, ge=1)
    path_seed_count: int = Field(default=3, ge=1)
    rrf_constant: int = Field(default=60, ge=0)
    workers: int = Field(default=4, ge=1)


class ExtractionConfig(_Section):
    chunk_size: int = Field(default=1200, ge=1)
    workers: int = Field(default=4, ge=1)
    mu: float = Field(default=0.8, ge=0.0, le=1.0)
    min_support: int = Field(default=2, ge=1)
    expansion_mode: Literal["batch", "online"] = "batch"
    expand_schema: bool = True
    reextract: bool = True
    failure_rate_threshold: float = Field(default=0.5, ge=0.0, le=1.0)


class EvaluationConfig(_Section):
    workers: int = Field(default=4, ge=1)


class PathsConfig(_Section):
    schema_path: str = "schema.yaml"
    corpus: Optional[str] = None
    artifacts: str = "artifacts"
    dataset: Optional[str] = None
    output: str = "reports"


class PipelineConfig(_Section):
    seed: int = 42
    providers: ProvidersConfig = Field(default_factory=ProvidersConfig)
    detection: DetectionConfig = Field(default_factory=DetectionConfig)
    retrieval: RetrievalConfig = Field(default_factory=RetrievalConfig)
    extraction: ExtractionConfig = Field(default_factory=ExtractionConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)

    @classmethod
    def load(cls, path: Optional[str]) -> "PipelineConfig":
        """Load from YAML; None gives the all-defaults config."""
        if path is None:
            return cls()
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError(f"Config file not found: {config_path}")
        try:
            with open(config_path, encoding="utf-8") as f:
                raw = yaml.safe_load(f) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"Config file {config_path} is not valid YAML: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"Config file {config_path} must hold a mapping")
        try:
            config = cls.model_validate(raw)
        except ValidationError as exc:
            raise ConfigError(f"Invalid config {config_path}: {exc}") from exc
        logger.info("Loaded pipeline config from %s", config_path)
        return config

    def override(self, updates: dict[str, Any]) -> "PipelineConfig":
        """
        Apply dotted-key overrides, e.g. {"extraction.mu": 0.9}. None values
        are skipped so unset CLI flags leave the config alone.
        """
        data = self.model_dump()
        for dotted, value in updates.items():
            if value is None:
                continue
            node = data
            *parents, leaf = dotted.split(".")
            for key in parents:
                if not isinstance(node, dict) or key not in node:
                    raise ConfigError(f"Unknown config key: {dotted}")
                node = node[key]
            if not isinstance(node, dict) or leaf not in node:
                raise ConfigError(f"Unknown config key: {dotted}")
            node[leaf] = value
        try:
            return PipelineConfig.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(f"Invalid override: {exc}") from exc

    @property
    def detection_params(self) -> DetectionParams:
        return self.detection.to_params(self.seed)
