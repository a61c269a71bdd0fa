"""Query augmentation: rewrite a user question into an answer-shaped pseudo-document.

A language-model client completes an augmentation template around the
query; retrieval then searches with the completion instead of the raw
question, so the query vector lives in document space rather than
question space. Client failures either fall back to the raw query
(flagged un-augmented) or raise, per caller policy.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import requests

DEFAULT_TEMPLATE_TEXT = (
    "Write a short passage, in the style of a reference document, "
    "that would answer the question: {query}"
)


class AugmentError(RuntimeError):
    """Raised when augmentation fails and the fallback policy is 'fail'."""


class LlmClientError(RuntimeError):
    """Raised when a language-model client cannot produce a completion."""


@dataclass(frozen=True)
class AugmentTemplate:
    template: str
    name: str = "default"

    def __post_init__(self) -> None:
        if self.template.count("{query}") != 1:
            raise ValueError("template must contain exactly one {query} placeholder")

    def render(self, query: str) -> str:
        return self.template.replace("{query}", query)


DEFAULT_TEMPLATE = AugmentTemplate(template=DEFAULT_TEMPLATE_TEXT, name="default")
IDENTITY_TEMPLATE = AugmentTemplate(template="{query}", name="identity")


class LlmClient:
    """Interface: complete(prompt) -> completion text."""

    def complete(self, prompt: str, max_tokens: int | None = None) -> str:
        raise NotImplementedError


class StubLlmClient(LlmClient):
    """Deterministic offline client for hermetic tests and dry runs.

    Resolution order: first rule whose key (sorted for determinism) occurs in
    the prompt, then ``default``, then ``reply``. A ``{prompt}`` placeholder
    in the chosen string is replaced with the incoming prompt.
    """

    def __init__(
        self,
        reply: str = "{prompt}",
        rules: dict[str, str] | None = None,
        default: str | None = None,
    ):
        self.reply = reply
        self.rules = dict(rules) if rules else {}
        self.default = default
        self.calls = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "StubLlmClient":
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            reply=spec.get("reply", "{prompt}"),
            rules=spec.get("rules"),
            default=spec.get("default"),
        )

    def complete(self, prompt: str, max_tokens: int | None = None) -> str:
        self.calls += 1
        for key in sorted(self.rules):
            if key in prompt:
                return self.rules[key].replace("{prompt}", prompt)
        if self.default is not None:
            return self.default.replace("{prompt}", prompt)
        return self.reply.replace("{prompt}", prompt)


class FailingLlmClient(LlmClient):
    """Always raises; stands in for an unreachable backend in tests."""

    def complete(self, prompt: str, max_tokens: int | None = None) -> str:
        raise LlmClientError("llm backend unavailable")


class RemoteLlmClient(LlmClient):
    """Calls POST <endpoint>/generate on a model server, with retries."""

    def __init__(
        self,
        endpoint: str,
        max_tokens: int = 256,
        temperature: float = 0.0,
        timeout: float = 600.0,
        retries: int = 2,
        retry_wait: float = 1.0,
        seed: int | None = None,
    ):
        if temperature < 0:
            raise ValueError("temperature must be >= 0")
        if retries < 0:
            raise ValueError("retries must be >= 0")
        self.endpoint = endpoint.rstrip("/")
        self.max_tokens = max_tokens
        self.temperature = temperature
        self.timeout = timeout
        self.retries = retries
        self.retry_wait = retry_wait
        self.seed = seed

    def complete(self, prompt: str, max_tokens: int | None = None) -> str:
        payload = {
            "prompt": prompt,
            "max_tokens": max_tokens if max_tokens is not None else self.max_tokens,
            "temperature": self.temperature,
        }
        if self.seed is not None:
            payload["seed"] = self.seed
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = requests.post(
                    f"{self.endpoint}/generate", json=payload, timeout=self.timeout
                )
                resp.raise_for_status()
                return resp.json()["text"]
            except (requests.RequestException, KeyError, ValueError) as e:
                last_error = e
                if attempt < self.retries:
                    time.sleep(self.retry_wait)
        raise LlmClientError(f"generate endpoint failed after {self.retries + 1} attempts: {last_error}")


@dataclass(frozen=True)
class AugmentedQuery:
    text: str
    augmented: bool  # False when the fallback passed the raw query through


def augment_query(
    client: LlmClient,
    query: str,
    template: AugmentTemplate = DEFAULT_TEMPLATE,
    fallback: str = "passthrough",
) -> AugmentedQuery:
    """Return the pseudo-document for a query, or the raw query on fallback."""
    if not query.strip():
        raise ValueError("query must be non-empty")
    if fallback not in ("passthrough", "fail"):
        raise ValueError(f"unknown fallback policy: {fallback!r}")
    prompt = template.render(query)
    try:
        completion = client.complete(prompt)
    except Exception as e:
        if fallback == "fail":
            raise AugmentError(f"augmentation failed: {e}") from e
        return AugmentedQuery(text=query, augmented=False)
    if not completion.strip():
        if fallback == "fail":
            raise AugmentError("augmenter returned empty text")
        return AugmentedQuery(text=query, augmented=False)
    return AugmentedQuery(text=completion, augmented=True)
