"""
Scripted providers: deterministic offline backends for tests and dry runs.

ScriptedGenerationProvider answers from registered fixtures. A fixture names a
template id, a (possibly partial) set of variables to match, and the canned
response. Matching canonicalizes whitespace; among matching fixtures the one
constraining the most variables wins, ties go to the earliest registered.
A fixture with no match variables is an explicit template-wide default.
A request nothing matches raises FixtureMissError; there is no silent
fallback.

A fixture response may be a list: successive matching calls walk the list and
the last entry repeats. This scripts multi-iteration agent runs. The walk is
shared by every request the fixture matches unless the fixture names
cursor_by variables; then each distinct combination of their values keeps its
own position.

Fixture directory format: every *.yaml file holds a list of entries:
    - template_id: summarize_community
      match:
        members: "Aspirin, Ibuprofen"
      response: |
        Name: Pain relievers
        Description: Drugs that reduce pain.
    - template_id: reason_reflect
      cursor_by: [question]
      response: ["REFINE: who makes it?", "ANSWER: Pfizer"]

ScriptedEmbeddingProvider maps each text to a vector drawn from a generator
seeded by (seed, sha256(text)), so identical text gives identical vectors in
every process. Explicit vectors may be pinned for chosen texts.
"""

import hashlib
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import yaml

from app.schemas.cost import GenerationRequest
from app.services.providers.base import (
    Completion,
    EmbeddingProvider,
    FixtureMissError,
    GenerationProvider,
    whitespace_tokens,
)

logger = logging.getLogger(__name__)


def canonicalize(value: str) -> str:
    return " ".join(str(value).split())


@dataclass
class Fixture:
    template_id: str
    match: dict[str, str]
    responses: list[str]
    cursor_by: tuple[str, ...] = ()
    served: dict[tuple[str, ...], int] = field(default_factory=dict)

    def matches(self, template_id: str, variables: dict[str, str]) -> bool:
        if template_id != self.template_id:
            return False
        return all(
            key in variables and canonicalize(variables[key]) == canonicalize(value)
            for key, value in self.match.items()
        )

    def next_response(self, variables: dict[str, str]) -> str:
        cursor = tuple(canonicalize(variables.get(key, "")) for key in self.cursor_by)
        count = self.served.get(cursor, 0)
        self.served[cursor] = count + 1
        return self.responses[min(count, len(self.responses) - 1)]


class ScriptedGenerationProvider(GenerationProvider):
    name = "scripted"
    measures_time = False

    def __init__(self, prompt_set: str = "default") -> None:
        super().__init__(prompt_set=prompt_set)
        self._fixtures: list[Fixture] = []
        self._lock = threading.Lock()
        self.calls: list[GenerationRequest] = []

    def register(
        self,
        template_id: str,
        response: Union[str, list[str]],
        cursor_by: Sequence[str] = (),
        **match: str,
    ) -> "ScriptedGenerationProvider":
        responses = [response] if isinstance(response, str) else list(response)
        if not responses:
            raise ValueError("A fixture needs at least one response")
        with self._lock:
            self._fixtures.append(
                Fixture(
                    template_id=template_id,
                    match=dict(match),
                    responses=responses,
                    cursor_by=tuple(cursor_by),
                )
            )
        return self

    @classmethod
    def from_directory(
        cls, directory: Union[str, Path], prompt_set: str = "default"
    ) -> "ScriptedGenerationProvider":
        provider = cls(prompt_set=prompt_set)
        paths = sorted(Path(directory).glob("*.yaml"))
        for path in paths:
            with open(path, encoding="utf-8") as f:
                entries = yaml.safe_load(f) or []
            if not isinstance(entries, list):
                raise ValueError(f"Fixture file {path} must hold a YAML list")
            for entry in entries:
                provider.register(
                    entry["template_id"],
                    entry["response"],
                    cursor_by=entry.get("cursor_by") or (),
                    **{k: str(v) for k, v in (entry.get("match") or {}).items()},
                )
        logger.info(
            "Loaded %d scripted fixtures from %d files in %s",
            len(provider._fixtures),
            len(paths),
            directory,
        )
        return provider

    def calls_for(self, template_id: str) -> list[GenerationRequest]:
        with self._lock:
            return [call for call in self.calls if call.template_id == template_id]

    def _complete(
        self, request: GenerationRequest, system: str, user: str, max_output: int
    ) -> Completion:
        variables = dict(request.variables)
        with self._lock:
            self.calls.append(request)
            best: Optional[Fixture] = None
            for fixture in self._fixtures:
                if not fixture.matches(request.template_id, variables):
                    continue
                if best is None or len(fixture.match) > len(best.match):
                    best = fixture
            if best is None:
                raise FixtureMissError(request.template_id, variables)
            text = best.next_response(variables)
        return Completion(
            text=text,
            prompt_tokens=whitespace_tokens(system) + whitespace_tokens(user),
            completion_tokens=whitespace_tokens(text),
        )


class ScriptedEmbeddingProvider(EmbeddingProvider):
    name = "scripted-embedding"
    measures_time = False

    def __init__(
        self,
        dimension: int = 16,
        seed: int = 42,
        vectors: Optional[dict[str, list[float]]] = None,
    ) -> None:
        super().__init__(dimension)
        self.seed = seed
        self._pinned: dict[str, np.ndarray] = {}
        for text, vector in (vectors or {}).items():
            self.pin(text, vector)

    def pin(self, text: str, vector: list[float]) -> None:
        array = np.asarray(vector, dtype=np.float64)
        if array.shape != (self.dimension,):
            raise ValueError(
                f"Pinned vector for {text!r} has shape {array.shape}, "
                f"expected ({self.dimension},)"
            )
        self._pinned[text] = array

    def vector_for(self, text: str) -> np.ndarray:
        if text in self._pinned:
            return self._pinned[text].copy()
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        rng = np.random.default_rng([self.seed, int.from_bytes(digest[:8], "big")])
        return rng.standard_normal(self.dimension)

    def _embed(self, texts: list[str]) -> tuple[np.ndarray, int]:
        vectors = np.vstack([self.vector_for(text) for text in texts])
        return vectors, sum(whitespace_tokens(text) for text in texts)
