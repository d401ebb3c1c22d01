"""Chat-completions HTTP client with retries, timeouts, and bounded concurrency.

Also provides a scriptable mock gateway so the whole pipeline can run
deterministically with no network access.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import requests

log = logging.getLogger(__name__)

API_KEY_ENV = "CITEGROUND_API_KEY"
RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class FinishReason(str, Enum):
    STOP = "stop"
    LENGTH = "length"
    ERROR = "error"


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[tuple[str, str], ...]  # (role, content)
    temperature: float = 0.0
    max_output_tokens: int = 4096
    model_name: str = ""

    def __post_init__(self):
        if not self.messages:
            raise ValueError("ChatRequest needs at least one message")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        for role, _ in self.messages:
            if role not in ("system", "user", "assistant"):
                raise ValueError(f"invalid role: {role!r}")


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: FinishReason = FinishReason.STOP
    prompt_tokens: int = 0
    completion_tokens: int = 0


class GatewayError(RuntimeError):
    pass


class TransportError(GatewayError):
    """Retries exhausted on transient failures."""

    def __init__(self, message: str, attempts: list[str]):
        self.attempts = attempts
        super().__init__(f"{message}; attempts: {attempts}")


class RequestError(GatewayError):
    """Non-retryable HTTP error (4xx)."""

    def __init__(self, status: int, body_excerpt: str):
        self.status = status
        self.body_excerpt = body_excerpt
        super().__init__(f"HTTP {status}: {body_excerpt}")


def user_request(prompt: str, system: str = "", **kwargs) -> ChatRequest:
    messages = []
    if system:
        messages.append(("system", system))
    messages.append(("user", prompt))
    return ChatRequest(messages=tuple(messages), **kwargs)


class HttpGateway:
    """POSTs to <base_url>/chat/completions with bearer auth.

    Transient failures (429/5xx/timeout) are retried with exponential
    backoff; in-flight requests are capped by a semaphore shared across
    threads.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: Optional[str] = None,
        max_in_flight: int = 4,
        retries: int = 3,
        timeout_secs: float = 120.0,
        backoff_base_secs: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
        session: Optional[requests.Session] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.retries = retries
        self.timeout_secs = timeout_secs
        self.backoff_base_secs = backoff_base_secs
        self._sleep = sleep
        self._slots = threading.Semaphore(max_in_flight)
        self._session = session or requests.Session()

    def chat(self, request: ChatRequest) -> ChatResponse:
        body = {
            "model": request.model_name or self.model,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.base_url}/chat/completions"

        attempts: list[str] = []
        with self._slots:
            for attempt in range(1, self.retries + 1):
                try:
                    resp = self._session.post(
                        url, json=body, headers=headers, timeout=self.timeout_secs
                    )
                except requests.RequestException as exc:
                    attempts.append(f"attempt {attempt}: {exc.__class__.__name__}")
                else:
                    if resp.status_code == 200:
                        return self._parse(resp.json())
                    if resp.status_code in RETRYABLE_STATUS:
                        attempts.append(f"attempt {attempt}: HTTP {resp.status_code}")
                    else:
                        raise RequestError(resp.status_code, resp.text[:500])
                if attempt < self.retries:
                    self._sleep(self.backoff_base_secs * 2 ** (attempt - 1))
        raise TransportError("retries exhausted", attempts)

    @staticmethod
    def _parse(payload: dict) -> ChatResponse:
        choice = payload["choices"][0]
        usage = payload.get("usage", {})
        reason = choice.get("finish_reason", "stop")
        if reason not in ("stop", "length"):
            reason = "error"
        return ChatResponse(
            content=choice["message"]["content"] or "",
            finish_reason=FinishReason(reason),
            prompt_tokens=usage.get("prompt_tokens", 0),
            completion_tokens=usage.get("completion_tokens", 0),
        )


@dataclass
class MockScriptEntry:
    """One scripted response; `match` restricts it to prompts containing it."""

    content: str = ""
    match: Optional[str] = None
    status: Optional[int] = None  # scripted HTTP failure instead of content
    finish_reason: FinishReason = FinishReason.STOP


class MockGateway:
    """Deterministic stand-in for HttpGateway.

    Scripted entries are consumed in order (first unconsumed entry whose
    `match` substring occurs in the prompt). With auto=True, prompts with
    no matching entry get a synthesized, well-formed response: summaries
    cite every requested tag exactly once, judge questions get "yes", and
    rewrite requests echo the summary untouched.
    """

    def __init__(self, script: Optional[list[MockScriptEntry]] = None, auto: bool = False):
        self.script = list(script or [])
        self.auto = auto
        self.requests: list[ChatRequest] = []
        self.in_flight = 0
        self.max_observed_in_flight = 0
        self._lock = threading.Lock()

    def chat(self, request: ChatRequest) -> ChatResponse:
        prompt = "\n".join(c for _, c in request.messages)
        with self._lock:
            self.requests.append(request)
            self.in_flight += 1
            self.max_observed_in_flight = max(self.max_observed_in_flight, self.in_flight)
            entry = self._take(prompt)
        try:
            if entry is not None:
                if entry.status is not None:
                    if entry.status in RETRYABLE_STATUS:
                        raise TransportError(
                            "mock transient failure", [f"HTTP {entry.status}"]
                        )
                    raise RequestError(entry.status, "mock error body")
                return ChatResponse(content=entry.content, finish_reason=entry.finish_reason)
            if self.auto:
                return ChatResponse(content=_auto_response(prompt))
            raise TransportError("mock script exhausted", ["no entry matched"])
        finally:
            with self._lock:
                self.in_flight -= 1

    def _take(self, prompt: str) -> Optional[MockScriptEntry]:
        for i, entry in enumerate(self.script):
            if entry.match is None or entry.match in prompt:
                return self.script.pop(i)
        return None


_HEX_TAG_RE = re.compile(r"<([0-9a-f]{8})>")
_TAG_COUNT_RE = re.compile(r"list\s+of (\d+) XML tags")
_SUMMARY_BLOCK_RE = re.compile(r"<summary>\s*(.*?)\s*</summary>", re.DOTALL)


def _auto_response(prompt: str) -> str:
    if "6 custom instructions" in prompt:
        return "\n".join(
            [
                "1. Summarize the main policy points for a general audience.",
                "2. Focus on financial aspects in a neutral tone.",
                "3. Provide a comprehensive overview for domain experts.",
                "4. Explain the document's position on deep-sea mining.",
                "5. Describe the astronaut training program mentioned in the text.",
                "6. List the orchestra's rehearsal schedule from the text.",
            ]
        )
    if re.search(r"[Aa]nswer (?:with a single word, )?yes or no", prompt):
        return "yes, looks consistent with the source."
    if "first-person" in prompt and "<summary>" in prompt:
        m = _SUMMARY_BLOCK_RE.search(prompt)
        summary = m.group(1) if m else ""
        return (
            "<reasoning>I will keep the structure and present the reasoning "
            "from my own perspective.</reasoning>\n"
            f"<summary>{summary}</summary>"
        )
    # summarization prompt: select the requested number of tags from the
    # prompt's tagged text and cite each exactly once
    tags = list(dict.fromkeys(_HEX_TAG_RE.findall(prompt)))
    m = _TAG_COUNT_RE.search(prompt)
    if m is not None:
        tags = tags[: int(m.group(1))]
    sentences = " ".join(
        f"Key point {i + 1} of the source [<{t}>]." for i, t in enumerate(tags)
    )
    if not sentences:
        sentences = "The document contains no tagged sentences."
    tag_block = "\n".join(f"<{t}>" for t in tags)
    return (
        f"<xml_tags>\n{tag_block}\n</xml_tags>\n"
        "<reasoning>I will structure the summary around the tagged key "
        "statements and cite each exactly once.</reasoning>\n"
        f"<summary>{sentences}</summary>"
    )


def load_mock_script(path: str) -> list[MockScriptEntry]:
    """Read a JSON list of {content, match?, status?, finish_reason?} objects."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    entries = []
    for obj in raw:
        entries.append(
            MockScriptEntry(
                content=obj.get("content", ""),
                match=obj.get("match"),
                status=obj.get("status"),
                finish_reason=FinishReason(obj.get("finish_reason", "stop")),
            )
        )
    return entries
