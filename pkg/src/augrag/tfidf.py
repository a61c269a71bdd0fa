"""TF-IDF model over sentence chunks: smoothed idf, L2-normalized sparse vectors, cosine.

Weighting: raw term count x idf with idf(t) = ln((1 + n) / (1 + df(t))) + 1,
then L2 normalization (a zero vector stays zero). Every chunk counts as one
"document" for df purposes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Chunk
from .tokenizer import TokenizerConfig, tokenize


@dataclass
class Vocabulary:
    """Term ids, per-term chunk frequencies, and corpus-size statistics."""

    term_to_id: dict[str, int]
    df: np.ndarray  # chunk frequency per term id
    n_docs: int
    avg_unique_terms: float  # mean unique terms per chunk

    def __len__(self) -> int:
        return len(self.term_to_id)

    @property
    def id_to_term(self) -> list[str]:
        terms = [""] * len(self.term_to_id)
        for t, i in self.term_to_id.items():
            terms[i] = t
        return terms


@dataclass(frozen=True)
class SparseVector:
    """Sorted (term_id, weight) pairs stored as parallel tuples."""

    indices: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values must have equal length")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("term ids must be strictly increasing")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("weights must be finite")

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))

    def items(self) -> list[tuple[int, float]]:
        return list(zip(self.indices, self.values))

    def to_dict(self) -> dict[int, float]:
        return dict(zip(self.indices, self.values))


@dataclass
class TfIdfModel:
    vocab: Vocabulary
    idf: np.ndarray  # per term id
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)


def smoothed_idf(n_docs: int, df: np.ndarray) -> np.ndarray:
    return np.log((1.0 + n_docs) / (1.0 + df)) + 1.0


def fit(chunks: list[Chunk], tokenizer: TokenizerConfig = TokenizerConfig()) -> TfIdfModel:
    """Build the vocabulary and idf table from chunk texts."""
    if not chunks:
        raise ValueError("cannot fit TF-IDF on an empty chunk list")
    term_to_id: dict[str, int] = {}
    df_counts: dict[str, int] = {}
    total_unique = 0
    for chunk in chunks:
        unique = sorted(set(tokenize(chunk.text, tokenizer)))
        total_unique += len(unique)
        for term in unique:
            if term not in term_to_id:
                term_to_id[term] = len(term_to_id)
            df_counts[term] = df_counts.get(term, 0) + 1
    df = np.zeros(len(term_to_id), dtype=np.int64)
    for term, tid in term_to_id.items():
        df[tid] = df_counts[term]
    vocab = Vocabulary(
        term_to_id=term_to_id,
        df=df,
        n_docs=len(chunks),
        avg_unique_terms=total_unique / len(chunks),
    )
    return TfIdfModel(vocab=vocab, idf=smoothed_idf(vocab.n_docs, df), tokenizer=tokenizer)


def transform(model: TfIdfModel, text: str) -> SparseVector:
    """Vectorize text: raw in-vocabulary counts x idf, L2-normalized."""
    counts: dict[int, int] = {}
    for token in tokenize(text, model.tokenizer):
        tid = model.vocab.term_to_id.get(token)
        if tid is not None:
            counts[tid] = counts.get(tid, 0) + 1
    if not counts:
        return SparseVector(indices=(), values=())
    indices = tuple(sorted(counts))
    weights = [counts[i] * float(model.idf[i]) for i in indices]
    norm = math.sqrt(sum(w * w for w in weights))
    if norm > 0:
        weights = [w / norm for w in weights]
    return SparseVector(indices=indices, values=tuple(weights))


def cosine(a, b) -> float:
    """Cosine similarity for two sparse or two dense vectors; 0.0 when either norm is 0."""
    if isinstance(a, SparseVector) and isinstance(b, SparseVector):
        dot = 0.0
        i = j = 0
        while i < len(a.indices) and j < len(b.indices):
            if a.indices[i] == b.indices[j]:
                dot += a.values[i] * b.values[j]
                i += 1
                j += 1
            elif a.indices[i] < b.indices[j]:
                i += 1
            else:
                j += 1
        na, nb = a.norm(), b.norm()
    elif isinstance(a, SparseVector) or isinstance(b, SparseVector):
        raise TypeError("cosine requires two vectors of the same kind")
    else:
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if a.shape != b.shape:
            raise ValueError(f"dense dimension mismatch: {a.shape} vs {b.shape}")
        dot = float(a @ b)
        na = float(np.linalg.norm(a))
        nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


MODEL_FORMAT = "augrag.tfidf/1"


def save_model(model: TfIdfModel, path: str | Path) -> None:
    """Persist the model as versioned json: tokenizer, corpus stats, and (term, df, idf) rows."""
    terms = model.vocab.id_to_term
    payload = {
        "format": MODEL_FORMAT,
        "tokenizer": model.tokenizer.to_dict(),
        "n_docs": model.vocab.n_docs,
        "avg_unique_terms": model.vocab.avg_unique_terms,
        "terms": [
            [terms[i], int(model.vocab.df[i]), float(model.idf[i])] for i in range(len(terms))
        ],
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")


def load_model(path: str | Path) -> TfIdfModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported tfidf model format: {payload.get('format')!r}")
    rows = payload["terms"]
    vocab = Vocabulary(
        term_to_id={row[0]: i for i, row in enumerate(rows)},
        df=np.array([row[1] for row in rows], dtype=np.int64),
        n_docs=int(payload["n_docs"]),
        avg_unique_terms=float(payload["avg_unique_terms"]),
    )
    idf = np.array([row[2] for row in rows], dtype=np.float64)
    return TfIdfModel(vocab=vocab, idf=idf, tokenizer=TokenizerConfig.from_dict(payload["tokenizer"]))
