"""Grounded answer generation: prompt construction and the answer record.

The prompt instructs the model to answer only from the retrieved passages
and to stay within a word budget. Passages render in descending score
order; when the rendered prompt would exceed the character budget, whole
passages are dropped lowest-score-first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .augment import LlmClient
from .corpus import ContextPassage

MODES = ("no_rag", "rag_raw", "rag_augmented")
RETRIEVERS = ("tfidf", "pvec", "bert_umap")

DEFAULT_PROMPT_TEMPLATE = (
    "Answer the question using only the provided context. "
    "Respond in at most {max_words} words.\n\n"
    "Context:\n{context}\n\n"
    "Question: {query}\nAnswer:"
)
NO_CONTEXT_BLOCK = "(no context available)"
PASSAGE_SEPARATOR = "\n\n"


@dataclass(frozen=True)
class GenConfig:
    max_words: int = 60
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE
    max_prompt_chars: int = 8000

    def __post_init__(self) -> None:
        if self.max_words < 1:
            raise ValueError("max_words must be >= 1")
        for placeholder in ("{query}", "{context}", "{max_words}"):
            if self.prompt_template.count(placeholder) != 1:
                raise ValueError(f"prompt template needs exactly one {placeholder}")
        if self.max_prompt_chars < 1:
            raise ValueError("max_prompt_chars must be >= 1")


@dataclass
class Answer:
    text: str
    mode: str  # no_rag | rag_raw | rag_augmented
    retriever: str  # tfidf | pvec | bert_umap | none
    passages_used: list[ContextPassage] = field(default_factory=list)
    query: str = ""

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode: {self.mode!r}")
        if self.retriever not in (*RETRIEVERS, "none"):
            raise ValueError(f"unknown retriever: {self.retriever!r}")
        if self.mode == "no_rag" and self.passages_used:
            raise ValueError("no_rag answers must not carry passages")

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "mode": self.mode,
            "retriever": self.retriever,
            "query": self.query,
            "passages_used": [
                {
                    "center_chunk_id": p.center_chunk_id,
                    "member_chunk_ids": list(p.member_chunk_ids),
                    "text": p.text,
                    "score": p.score,
                }
                for p in self.passages_used
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Answer":
        return cls(
            text=d["text"],
            mode=d["mode"],
            retriever=d["retriever"],
            query=d.get("query", ""),
            passages_used=[
                ContextPassage(
                    center_chunk_id=p["center_chunk_id"],
                    member_chunk_ids=list(p["member_chunk_ids"]),
                    text=p["text"],
                    score=p["score"],
                )
                for p in d.get("passages_used", [])
            ],
        )


def _render(query: str, passages: list[ContextPassage], cfg: GenConfig) -> str:
    context = (
        PASSAGE_SEPARATOR.join(p.text for p in passages) if passages else NO_CONTEXT_BLOCK
    )
    return (
        cfg.prompt_template.replace("{max_words}", str(cfg.max_words))
        .replace("{context}", context)
        .replace("{query}", query)
    )


def build_prompt(query: str, passages: list[ContextPassage], cfg: GenConfig = GenConfig()) -> str:
    """Render the generation prompt; drops whole passages if over the char budget."""
    if not query.strip():
        raise ValueError("query must be non-empty")
    ordered = sorted(passages, key=lambda p: -p.score)
    prompt = _render(query, ordered, cfg)
    while len(prompt) > cfg.max_prompt_chars and ordered:
        ordered = ordered[:-1]
        prompt = _render(query, ordered, cfg)
    return prompt


def generate_answer(
    client: LlmClient,
    prompt: str,
    query: str,
    mode: str,
    retriever: str,
    passages: list[ContextPassage] | None = None,
) -> Answer:
    """Obtain the model completion for a built prompt. Client errors propagate."""
    if not prompt.strip():
        raise ValueError("prompt must be non-empty")
    text = client.complete(prompt)
    return Answer(
        text=text,
        mode=mode,
        retriever=retriever,
        passages_used=list(passages or []),
        query=query,
    )
