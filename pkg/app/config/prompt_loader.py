"""
Prompt template loader.

Loads prompt configs from YAML files under app/config/prompts/{prompt_set}/.
Supports per-set overrides: call load_prompt("decompose", prompt_set="medical")
to get a medical-specific decomposer prompt, with automatic fallback to
"default" if the set-specific file doesn't exist.

Configs are cached via lru_cache; identical (name, prompt_set) pairs are read
from disk only once per process lifetime.  Call reload_prompts() to clear the
cache (e.g. in tests or after editing a template without restart).

YAML schema expected for each prompt file:
    version: 1                       # bump whenever the wording changes
    max_tokens: 512                  # default output budget for the call
    system: |                        # optional; omit for no system prompt
      You are a...
    user_template: |                 # required; Python .format()-style template
      Question: {query}
      ...

Note on brace escaping: user_template is processed via Python str.format(), so
use {variable} for placeholders and {{ / }} for literal braces in the template
(they appear as { / } in the final prompt sent to the model).
"""

import logging
import string
from functools import lru_cache
from pathlib import Path
from typing import Any

import yaml

logger = logging.getLogger(__name__)

_PROMPTS_DIR = Path(__file__).parent / "prompts"

TEMPLATE_IDS = frozenset(
    {
        "extract",
        "summarize_community",
        "decompose",
        "reason_reflect",
        "answer_open",
        "answer_reject",
        "judge",
    }
)


class UnknownTemplateError(KeyError):
    """Raised when a template id is not in the registered table."""


class TemplateVariableError(ValueError):
    """Raised when a template is rendered with unbound variables."""


@lru_cache(maxsize=64)
def load_prompt(name: str, prompt_set: str = "default") -> dict[str, Any]:
    """
    Load and cache a prompt config by template id and prompt set.

    Args:
        name:       Template id, one of TEMPLATE_IDS, e.g. "answer_reject" maps
                    to prompts/{prompt_set}/answer_reject.yaml.
        prompt_set: Override directory name.  Defaults to "default".
                    Falls back to "default" automatically when the requested
                    set directory or file does not exist.

    Returns:
        dict with at minimum the keys: version, max_tokens, user_template.
        The "system" key is present only when a system prompt is configured.

    Raises:
        UnknownTemplateError: When name is not a registered template id.
        FileNotFoundError:    When neither the set-specific nor default file exists.
        ValueError:           When the YAML file is missing required keys.
    """
    if name not in TEMPLATE_IDS:
        raise UnknownTemplateError(
            f"Template '{name}' is not registered. Known: {sorted(TEMPLATE_IDS)}"
        )

    # Resolve path: try requested set first, fall back to default
    path = _PROMPTS_DIR / prompt_set / f"{name}.yaml"
    if not path.exists():
        if prompt_set != "default":
            logger.debug(
                "Prompt '%s' not found for set '%s'; falling back to default",
                name,
                prompt_set,
            )
        path = _PROMPTS_DIR / "default" / f"{name}.yaml"

    if not path.exists():
        raise FileNotFoundError(
            f"Prompt config '{name}' not found. "
            f"Expected: {_PROMPTS_DIR / prompt_set / name}.yaml "
            f"or {_PROMPTS_DIR / 'default' / name}.yaml"
        )

    with open(path, encoding="utf-8") as f:
        config: dict = yaml.safe_load(f)

    for required_key in ("version", "max_tokens", "user_template"):
        if required_key not in config:
            raise ValueError(
                f"Prompt config '{path}' is missing required key '{required_key}'"
            )

    logger.debug(
        "Loaded prompt config '%s' v%s (set=%s) from %s",
        name,
        config["version"],
        prompt_set,
        path,
    )
    return config


def template_variables(name: str, prompt_set: str = "default") -> frozenset[str]:
    """Names of the {placeholders} a template expects."""
    template = load_prompt(name, prompt_set)["user_template"]
    return frozenset(
        field for _, field, _, _ in string.Formatter().parse(template) if field
    )


def render_prompt(
    name: str, variables: dict[str, str], prompt_set: str = "default"
) -> tuple[str, str]:
    """
    Render a template by plain variable substitution.

    Returns (system, user). Raises TemplateVariableError naming any
    placeholder left unbound.
    """
    config = load_prompt(name, prompt_set)
    missing = template_variables(name, prompt_set) - variables.keys()
    if missing:
        raise TemplateVariableError(
            f"Template '{name}' rendered without variables: {sorted(missing)}"
        )
    user = config["user_template"].format(**variables)
    return config.get("system", "") or "", user


def reload_prompts() -> None:
    """Clear the prompt config cache. Useful in tests or after YAML edits."""
    load_prompt.cache_clear()
    logger.info("Prompt config cache cleared")
