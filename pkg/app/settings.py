"""
Central settings module.

All environment-level configuration comes from environment variables (or .env
in local dev): provider credentials, endpoints, default model names and log
setup. Pipeline knobs (detection, retrieval, extraction parameters and artifact
paths) live in the YAML pipeline config instead; see
app/config/pipeline_config.py.

Never import settings directly from this file; always use the `settings`
singleton at the bottom so the entire process shares one instance.
"""

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",  # silently ignore unrecognised env vars
        case_sensitive=False,
    )

    # ── Logging ─────────────────────────────────────────────────────────────
    log_level: str = "INFO"
    log_format: str = "console"  # console | json

    # ── Generation backend ─────────────────────────────────────────────────
    # Set ANTHROPIC_API_KEY to use the HTTP generation backend. Scripted runs
    # (tests, offline builds) never read it.
    anthropic_api_key: str = ""
    anthropic_base_url: str = ""  # empty → SDK default endpoint
    generation_model: str = "claude-haiku-4-5"

    # ── Embedding backend ──────────────────────────────────────────────────
    # Any OpenAI-compatible /embeddings endpoint (e.g. a local
    # sentence-transformers server hosting all-MiniLM-L6-v2).
    embedding_api_key: str = ""
    embedding_base_url: str = "http://localhost:8080/v1"
    embedding_model: str = "all-MiniLM-L6-v2"

    # ── Scripted providers ─────────────────────────────────────────────────
    # Directory of YAML fixture files consumed by ScriptedGenerationProvider
    # when a pipeline config selects backend=scripted without its own path.
    scripted_fixtures_dir: str = ""


# Singleton; import this everywhere
settings = Settings()
