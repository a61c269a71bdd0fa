"""Shared tokenization for lexical models and grounding checks."""

from __future__ import annotations

import re
from dataclasses import dataclass

_TOKEN_RE = re.compile(r"[0-9a-zA-Z]+")


@dataclass(frozen=True)
class TokenizerConfig:
    """Lowercase tokens split on non-alphanumeric runs; no stemming, no stop words."""

    lowercase: bool = True

    def to_dict(self) -> dict:
        return {"lowercase": self.lowercase}

    @classmethod
    def from_dict(cls, d: dict) -> "TokenizerConfig":
        return cls(lowercase=bool(d.get("lowercase", True)))


def tokenize(text: str, cfg: TokenizerConfig = TokenizerConfig()) -> list[str]:
    """Split ``text`` into alphanumeric tokens, lowercased by default."""
    if cfg.lowercase:
        text = text.lower()
    return _TOKEN_RE.findall(text)
