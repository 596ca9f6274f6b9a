"""Text-generation clients: a JSON-over-HTTP client and a scripted mock.

Wire format: ``POST`` the request fields as a JSON object, receive a JSON
array of completion strings.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass, field
from typing import Optional, Protocol, Sequence, Union

logger = logging.getLogger(__name__)

ENV_ENDPOINT = "KGREASON_LLM_ENDPOINT"
ENV_TOKEN = "KGREASON_LLM_TOKEN"
ENV_TIMEOUT = "KGREASON_LLM_TIMEOUT"


class GenerationError(RuntimeError):
    def __init__(self, message: str, status: Optional[int] = None, attempts: int = 0):
        super().__init__(message)
        self.status = status
        self.attempts = attempts


class MockExhaustedError(GenerationError):
    pass


@dataclass
class GenerationRequest:
    prompt: str
    num_completions: int = 1
    max_new_tokens: int = 256
    temperature: float = 0.0
    stop_sequences: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.num_completions < 1:
            raise ValueError("num_completions must be >= 1")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


class GenerationClient(Protocol):
    def generate(self, request: GenerationRequest) -> list[str]: ...


def generate(client: GenerationClient, request: GenerationRequest) -> list[str]:
    return client.generate(request)


class HttpGenerationClient:
    """Blocking client with bounded concurrency and retry on transport/5xx."""

    def __init__(self, endpoint: str, token: Optional[str] = None, timeout: float = 60.0,
                 retries: int = 2, backoff: float = 0.25, max_in_flight: int = 4):
        self.endpoint = endpoint
        self.token = token
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._slots = threading.BoundedSemaphore(max_in_flight)

    @classmethod
    def from_env(cls, **kw) -> "HttpGenerationClient":
        endpoint = os.environ.get(ENV_ENDPOINT)
        if not endpoint:
            raise GenerationError(f"{ENV_ENDPOINT} is not set")
        timeout = float(os.environ.get(ENV_TIMEOUT, "60"))
        return cls(endpoint, os.environ.get(ENV_TOKEN), timeout=timeout, **kw)

    def _post(self, body: bytes) -> list[str]:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        req = urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            payload = json.loads(resp.read().decode("utf-8"))
        if not isinstance(payload, list) or not all(isinstance(x, str) for x in payload):
            raise GenerationError("response must be a JSON array of strings")
        return payload

    def generate(self, request: GenerationRequest) -> list[str]:
        body = json.dumps(asdict(request)).encode("utf-8")
        status = None
        with self._slots:
            for attempt in range(1, self.retries + 2):
                try:
                    return self._post(body)[: request.num_completions]
                except urllib.error.HTTPError as exc:
                    status = exc.code
                    if exc.code < 500:
                        raise GenerationError(f"HTTP {exc.code}", exc.code, attempt) from exc
                    err = exc
                except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
                    err = exc
                if attempt <= self.retries:
                    delay = self.backoff * 2 ** (attempt - 1)
                    logger.warning("generation attempt %d failed (%s); retrying in %.2fs",
                                   attempt, err, delay)
                    time.sleep(delay)
        raise GenerationError(f"generation failed after {attempt} attempts: {err}",
                              status, attempt)


class ScriptedClient:
    """Serves canned responses in order and records every request."""

    def __init__(self, script: Sequence[Union[str, Sequence[str]]]):
        self._script = [[s] if isinstance(s, str) else list(s) for s in script]
        self._pos = 0
        self.calls: list[GenerationRequest] = []

    def generate(self, request: GenerationRequest) -> list[str]:
        self.calls.append(request)
        if self._pos >= len(self._script):
            raise MockExhaustedError(f"script exhausted after {self._pos} responses")
        out = self._script[self._pos][: request.num_completions]
        self._pos += 1
        return out

    @property
    def prompts(self) -> list[str]:
        return [c.prompt for c in self.calls]


def scripted_mock(script: Sequence[Union[str, Sequence[str]]]) -> ScriptedClient:
    return ScriptedClient(script)
