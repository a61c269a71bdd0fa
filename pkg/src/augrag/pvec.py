"""Paragraph vectors trained from scratch: PV-DBOW with negative sampling.

Each chunk gets a trainable document vector optimized, for every
(document, word) occurrence, to score its own words above noise words
drawn from a unigram^0.75 distribution:

    maximize  log sigma(v_doc . u_word) + sum_neg log sigma(-v_doc . u_neg)

Training is single-worker SGD in a fixed order (epoch, chunk, token) with
the learning rate decaying linearly from initial_lr to final_lr over the
total number of pairs, so a fixed seed reproduces bit-identical models.
Query texts are embedded by optimizing a fresh document vector with the
word matrix frozen.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Chunk
from .tokenizer import TokenizerConfig, tokenize


class AllOovWarning(UserWarning):
    """Inference text had no in-vocabulary tokens; the zero vector was returned."""


@dataclass(frozen=True)
class PvConfig:
    dim: int = 64
    epochs: int = 400
    negative_samples: int = 5
    initial_lr: float = 0.025
    final_lr: float = 0.0001
    min_count: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.negative_samples < 1:
            raise ValueError("negative_samples must be >= 1")
        if not (0 < self.final_lr <= self.initial_lr):
            raise ValueError("need 0 < final_lr <= initial_lr")

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "epochs": self.epochs,
            "negative_samples": self.negative_samples,
            "initial_lr": self.initial_lr,
            "final_lr": self.final_lr,
            "min_count": self.min_count,
            "seed": self.seed,
        }


class UnigramTable:
    """Negative-sampling distribution proportional to counts^0.75."""

    def __init__(self, counts: np.ndarray):
        if counts.sum() <= 0:
            raise ValueError("unigram table needs positive counts")
        weights = counts.astype(np.float64) ** 0.75
        self.probabilities = weights / weights.sum()
        self._cumulative = np.cumsum(self.probabilities)
        self._cumulative[-1] = 1.0  # guard against rounding drift

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.searchsorted(self._cumulative, rng.random(n), side="right")

    def sample_excluding(self, rng: np.random.Generator, n: int, excluded: int) -> np.ndarray:
        """Draw n word ids, redrawing any that hit the positive word."""
        out = np.empty(n, dtype=np.int64)
        filled = 0
        while filled < n:
            draw = self.sample(rng, n - filled)
            keep = draw[draw != excluded]
            out[filled : filled + len(keep)] = keep
            filled += len(keep)
        return out


@dataclass
class PvModel:
    doc_vectors: np.ndarray  # n_docs x dim
    word_output_vectors: np.ndarray  # |vocab| x dim
    term_to_id: dict[str, int]
    word_counts: np.ndarray  # per word id, after min_count filtering
    unigram_table: UnigramTable
    config: PvConfig
    chunk_ids: list[int]  # doc row -> chunk_id
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)
    epoch_losses: list[float] = field(default_factory=list)

    @property
    def n_docs(self) -> int:
        return self.doc_vectors.shape[0]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    # log sigma(x) = -log(1 + exp(-x)), stable for large |x|
    return -np.logaddexp(0.0, -x)


def _init_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    return (rng.random(dim) - 0.5) / dim


def pair_loss_and_grad(
    model: PvModel, doc_index: int, word_id: int, negs: list[int]
) -> tuple[float, np.ndarray, np.ndarray, list[np.ndarray]]:
    """Loss and analytic gradients of one negative-sampling pair.

    Returns (loss, grad wrt doc vector, grad wrt positive word output vector,
    grads wrt each negative word output vector). Gradients are of the loss,
    i.e. the direction SGD subtracts.
    """
    if not (0 <= doc_index < model.doc_vectors.shape[0]):
        raise IndexError(f"doc index {doc_index} out of range")
    n_words = model.word_output_vectors.shape[0]
    for wid in [word_id, *negs]:
        if not (0 <= wid < n_words):
            raise IndexError(f"word id {wid} out of range")
    v = model.doc_vectors[doc_index]
    u = model.word_output_vectors[[word_id, *negs]]  # (k+1, d)
    x = u @ v
    loss = float(-_log_sigmoid(x[0]) - _log_sigmoid(-x[1:]).sum())
    labels = np.zeros(len(negs) + 1)
    labels[0] = 1.0
    g = _sigmoid(x) - labels  # dL/d(u.v)
    grad_doc = g @ u
    grad_u = np.outer(g, v)
    return loss, grad_doc, grad_u[0], list(grad_u[1:])


def _doc_token_ids(
    chunks: list[Chunk], term_to_id: dict[str, int], tokenizer: TokenizerConfig
) -> list[np.ndarray]:
    docs = []
    for chunk in chunks:
        ids = [term_to_id[t] for t in tokenize(chunk.text, tokenizer) if t in term_to_id]
        docs.append(np.array(ids, dtype=np.int64))
    return docs


def train(
    chunks: list[Chunk],
    cfg: PvConfig = PvConfig(),
    tokenizer: TokenizerConfig = TokenizerConfig(),
) -> PvModel:
    """Train PV-DBOW document and word-output vectors over the chunks."""
    counts = Counter(t for c in chunks for t in tokenize(c.text, tokenizer))
    kept = sorted(t for t, n in counts.items() if n >= cfg.min_count)
    term_to_id = {t: i for i, t in enumerate(kept)}
    if not term_to_id:
        raise ValueError("no vocabulary survives min_count filtering")
    word_counts = np.array([counts[t] for t in kept], dtype=np.int64)

    docs = _doc_token_ids(chunks, term_to_id, tokenizer)
    for chunk, ids in zip(chunks, docs):
        if len(ids) == 0:
            raise ValueError(f"chunk {chunk.chunk_id} has no in-vocabulary tokens")
    if len(docs) < 2:
        raise ValueError("need at least 2 trainable chunks")

    rng = np.random.default_rng(cfg.seed)
    dim = cfg.dim
    doc_vectors = (rng.random((len(docs), dim)) - 0.5) / dim
    word_output = np.zeros((len(term_to_id), dim), dtype=np.float64)
    table = UnigramTable(word_counts)

    pairs_per_epoch = sum(len(ids) for ids in docs)
    total_pairs = pairs_per_epoch * cfg.epochs
    lr_span = cfg.initial_lr - cfg.final_lr
    k = cfg.negative_samples
    labels = np.zeros(k + 1)
    labels[0] = 1.0

    epoch_losses = []
    pair_counter = 0
    for _epoch in range(cfg.epochs):
        epoch_loss = 0.0
        for doc_index, token_ids in enumerate(docs):
            v = doc_vectors[doc_index]
            for word_id in token_ids:
                lr = cfg.initial_lr - lr_span * (pair_counter / total_pairs)
                pair_counter += 1
                targets = np.empty(k + 1, dtype=np.int64)
                targets[0] = word_id
                targets[1:] = table.sample_excluding(rng, k, word_id)
                u = word_output[targets]
                x = u @ v
                epoch_loss += float(-_log_sigmoid(x[0]) - _log_sigmoid(-x[1:]).sum())
                g = _sigmoid(x) - labels
                word_output[targets] -= lr * np.outer(g, v)
                v -= lr * (g @ u)
        epoch_losses.append(epoch_loss / pairs_per_epoch)

    return PvModel(
        doc_vectors=doc_vectors,
        word_output_vectors=word_output,
        term_to_id=term_to_id,
        word_counts=word_counts,
        unigram_table=table,
        config=cfg,
        chunk_ids=[c.chunk_id for c in chunks],
        tokenizer=tokenizer,
        epoch_losses=epoch_losses,
    )


def infer_vector(
    model: PvModel, text: str, infer_epochs: int = 100, seed: int = 0
) -> np.ndarray:
    """Embed unseen text: optimize a fresh doc vector with word vectors frozen.

    All-OOV text returns the zero vector and emits AllOovWarning.
    """
    if infer_epochs < 1:
        raise ValueError("infer_epochs must be >= 1")
    token_ids = np.array(
        [model.term_to_id[t] for t in tokenize(text, model.tokenizer) if t in model.term_to_id],
        dtype=np.int64,
    )
    if len(token_ids) == 0:
        warnings.warn("text has no in-vocabulary tokens; returning zero vector", AllOovWarning)
        return np.zeros(model.config.dim, dtype=np.float64)

    cfg = model.config
    rng = np.random.default_rng(seed)
    v = _init_vector(rng, cfg.dim)
    word_output = model.word_output_vectors
    table = model.unigram_table
    k = cfg.negative_samples
    labels = np.zeros(k + 1)
    labels[0] = 1.0
    total_pairs = len(token_ids) * infer_epochs
    lr_span = cfg.initial_lr - cfg.final_lr
    pair_counter = 0
    for _epoch in range(infer_epochs):
        for word_id in token_ids:
            lr = cfg.initial_lr - lr_span * (pair_counter / total_pairs)
            pair_counter += 1
            targets = np.empty(k + 1, dtype=np.int64)
            targets[0] = word_id
            targets[1:] = table.sample_excluding(rng, k, word_id)
            u = word_output[targets]
            g = _sigmoid(u @ v) - labels
            v -= lr * (g @ u)
    return v


MODEL_FORMAT = "augrag.pvec/1"


def save_model(model: PvModel, path: str | Path) -> None:
    """Versioned binary dump: config, vocabulary, counts, and both matrices."""
    meta = {
        "format": MODEL_FORMAT,
        "config": model.config.to_dict(),
        "tokenizer": model.tokenizer.to_dict(),
        "terms": sorted(model.term_to_id, key=model.term_to_id.get),
        "chunk_ids": model.chunk_ids,
        "epoch_losses": model.epoch_losses,
    }
    np.savez(
        path,
        meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
        doc_vectors=model.doc_vectors,
        word_output_vectors=model.word_output_vectors,
        word_counts=model.word_counts,
    )


def load_model(path: str | Path) -> PvModel:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported pvec model format: {meta.get('format')!r}")
        word_counts = data["word_counts"]
        return PvModel(
            doc_vectors=data["doc_vectors"],
            word_output_vectors=data["word_output_vectors"],
            term_to_id={t: i for i, t in enumerate(meta["terms"])},
            word_counts=word_counts,
            unigram_table=UnigramTable(word_counts),
            config=PvConfig(**meta["config"]),
            chunk_ids=list(meta["chunk_ids"]),
            tokenizer=TokenizerConfig.from_dict(meta["tokenizer"]),
            epoch_losses=list(meta["epoch_losses"]),
        )
