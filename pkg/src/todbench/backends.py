"""Text-generation backends: a deterministic scripted replay backend for
tests and offline oracle runs, and an HTTP chat-completions client.

The replay backend is keyed by (session_id, turn_index) where turn_index
counts generation requests within that session, including feedback retries.
A retry therefore consumes the next scripted entry, which is how a script
models a backend that corrects its call after feedback.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import requests

from .errors import BackendError

Message = tuple[str, str]  # (role, text); roles: system, user, assistant


@dataclass(frozen=True)
class GenerationRequest:
    messages: tuple[Message, ...]
    temperature: float = 0.0
    max_tokens: int = 1024
    model_id: str = ""
    session_id: str = ""  # replay keying; ignored by remote backends

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[0][0] != "system":
            raise ValueError("first message must have the system role")


@dataclass(frozen=True)
class GenerationResult:
    text: str
    latency_ms: int = 0
    attempt: int = 1


class Backend:
    """Interface: generate(request) -> GenerationResult."""

    model_id: str = ""

    def generate(self, request: GenerationRequest) -> GenerationResult:
        raise NotImplementedError


class ReplayBackend(Backend):
    """Pure table lookup; deterministic and side-effect free apart from the
    per-session request counters."""

    def __init__(self, script: Mapping[tuple[str, int], str],
                 model_id: str = "replay"):
        self._script = dict(script)
        self._counters: dict[str, int] = {}
        self._lock = threading.Lock()
        self.model_id = model_id
        self.calls = 0

    @classmethod
    def from_sequences(cls, sequences: Mapping[str, Sequence[str]],
                       model_id: str = "replay") -> "ReplayBackend":
        script = {(sid, i): text
                  for sid, texts in sequences.items()
                  for i, text in enumerate(texts)}
        return cls(script, model_id=model_id)

    def generate(self, request: GenerationRequest) -> GenerationResult:
        with self._lock:
            index = self._counters.get(request.session_id, 0)
            self._counters[request.session_id] = index + 1
            self.calls += 1
        key = (request.session_id, index)
        if key not in self._script:
            raise BackendError("Unreachable", f"no scripted completion for {key!r}")
        return GenerationResult(text=self._script[key], latency_ms=0, attempt=1)


def make_replay_backend(script: Mapping[tuple[str, int], str]) -> ReplayBackend:
    return ReplayBackend(script)


_RETRYABLE_STATUS = {429} | set(range(500, 600))
_MAX_ATTEMPTS = 4


@dataclass
class HttpBackendConfig:
    endpoint: str
    model_id: str
    api_key_env: str = ""
    timeout_ms: int = 60_000
    max_concurrency: int = 4
    backoff_base_s: float = 0.5


class HttpChatBackend(Backend):
    """POSTs a chat-completions style JSON body and reads the first choice.
    Transient failures (timeouts, 429, 5xx) retry with exponential backoff,
    at most 4 attempts; other 4xx never retry."""

    def __init__(self, config: HttpBackendConfig,
                 sleeper: Callable[[float], None] = time.sleep,
                 session: Optional[requests.Session] = None):
        self._config = config
        self._sleeper = sleeper
        self._session = session or requests.Session()
        self._slots = threading.Semaphore(max(1, config.max_concurrency))
        self.model_id = config.model_id

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self._config.api_key_env:
            key = os.environ.get(self._config.api_key_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        return headers

    def _body(self, request: GenerationRequest) -> dict:
        return {
            "model": request.model_id or self._config.model_id,
            "messages": [{"role": role, "content": text}
                         for role, text in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }

    def generate(self, request: GenerationRequest) -> GenerationResult:
        timeout_s = self._config.timeout_ms / 1000.0
        last_error: Optional[BackendError] = None
        with self._slots:
            for attempt in range(1, _MAX_ATTEMPTS + 1):
                if attempt > 1:
                    self._sleeper(self._config.backoff_base_s * 2 ** (attempt - 2))
                started = time.monotonic()
                try:
                    response = self._session.post(
                        self._config.endpoint, headers=self._headers(),
                        data=json.dumps(self._body(request)), timeout=timeout_s)
                except requests.RequestException as exc:
                    last_error = BackendError("Unreachable", str(exc))
                    continue
                latency_ms = int((time.monotonic() - started) * 1000)
                if response.status_code in _RETRYABLE_STATUS:
                    kind = "RateLimited" if response.status_code == 429 else "Unreachable"
                    last_error = BackendError(kind, f"HTTP {response.status_code}")
                    continue
                if response.status_code >= 400:
                    kind = "Unauthorized" if response.status_code in (401, 403) \
                        else "Unreachable"
                    raise BackendError(kind, f"HTTP {response.status_code}")
                return self._parse(response, latency_ms, attempt)
        assert last_error is not None
        raise last_error

    @staticmethod
    def _parse(response, latency_ms: int, attempt: int) -> GenerationResult:
        try:
            payload = response.json()
            choice = payload["choices"][0]
            text = choice.get("message", {}).get("content")
            if text is None:
                text = choice.get("text")
            finish_reason = choice.get("finish_reason", "")
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError("Truncated", f"unparseable completion body: {exc}")
        if not text:
            if finish_reason == "length":
                return GenerationResult(text="", latency_ms=latency_ms,
                                        attempt=attempt)
            raise BackendError("Truncated", "completion has no text")
        return GenerationResult(text=text, latency_ms=latency_ms, attempt=attempt)


@dataclass
class RecordingBackend(Backend):
    """Wraps a backend and keeps every request, for tests and debugging."""

    inner: Backend
    requests_seen: list = field(default_factory=list)

    def __post_init__(self):
        self.model_id = self.inner.model_id

    def generate(self, request: GenerationRequest) -> GenerationResult:
        self.requests_seen.append(request)
        return self.inner.generate(request)
