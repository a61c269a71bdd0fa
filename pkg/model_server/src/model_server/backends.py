"""Embedding and generation backends.

Two families:

* Built-in deterministic backends that need no model weights: a hashed
  character-ngram sentence encoder and an extractive generator. These keep
  the server runnable (and its tests hermetic) on machines without GPU RAM
  or a model cache.
* Real-model backends behind optional imports: a sentence-transformers
  encoder and a causal-LM generator. Select them via configuration; they
  load lazily in a background thread and the server answers 503 until
  ready.
"""

from __future__ import annotations

import hashlib
import re
import threading

import numpy as np


class BackendNotReady(RuntimeError):
    """Model still loading; callers should answer 503."""


class EmbeddingBackend:
    name: str = "embedding"
    dim: int = 0

    @property
    def ready(self) -> bool:
        return True

    def encode(self, texts: list[str]) -> list[list[float]]:
        raise NotImplementedError


class GeneratorBackend:
    name: str = "generator"

    @property
    def ready(self) -> bool:
        return True

    def generate(self, prompt: str, max_tokens: int, temperature: float, seed: int | None) -> str:
        raise NotImplementedError


_WORD_RE = re.compile(r"[0-9a-z]+")


class HashedNgramEncoder(EmbeddingBackend):
    """Deterministic sentence encoder: word unigrams + character trigrams
    hashed into a fixed number of buckets, L2-normalized.

    No trained weights, but lexically similar sentences land near each other,
    which is all the engine's integration paths need.
    """

    def __init__(self, dim: int = 384):
        self.name = f"hashed-ngram-{dim}"
        self.dim = dim

    def _bucket(self, feature: str) -> int:
        digest = hashlib.sha256(feature.encode("utf-8")).digest()
        return int.from_bytes(digest[:4], "little") % self.dim

    def encode(self, texts: list[str]) -> list[list[float]]:
        out = []
        for text in texts:
            vec = np.zeros(self.dim)
            lowered = text.lower()
            words = _WORD_RE.findall(lowered)
            for w in words:
                vec[self._bucket("w:" + w)] += 1.0
                padded = f" {w} "
                for i in range(len(padded) - 2):
                    vec[self._bucket("c:" + padded[i : i + 3])] += 0.5
            norm = np.linalg.norm(vec)
            if norm > 0:
                vec /= norm
            out.append(vec.tolist())
        return out


class ExtractiveGenerator(GeneratorBackend):
    """Deterministic generator that answers from the prompt itself.

    If the prompt carries a "Context:" block, the completion is the first
    max_tokens whitespace tokens of that block; otherwise the first tokens
    of the whole prompt. Temperature and seed are accepted for protocol
    compatibility and ignored.
    """

    name = "extractive"

    def generate(self, prompt: str, max_tokens: int, temperature: float, seed: int | None) -> str:
        source = prompt
        lowered = prompt.lower()
        start = lowered.find("context:")
        if start != -1:
            end = lowered.find("question:", start)
            source = prompt[start + len("context:") : end if end != -1 else None]
        tokens = source.split()
        return " ".join(tokens[:max_tokens])


class SentenceTransformerEncoder(EmbeddingBackend):
    """Pooled sentence embeddings via sentence-transformers (lazy load)."""

    def __init__(self, model_name: str = "sentence-transformers/all-MiniLM-L6-v2"):
        self.name = model_name
        self.dim = 0
        self._model = None
        self._error: Exception | None = None
        self._thread = threading.Thread(target=self._load, daemon=True)
        self._thread.start()

    def _load(self) -> None:
        try:
            from sentence_transformers import SentenceTransformer

            model = SentenceTransformer(self.name)
            self.dim = int(model.get_sentence_embedding_dimension())
            self._model = model
        except Exception as e:  # noqa: BLE001 - surfaced via ready/encode
            self._error = e

    @property
    def ready(self) -> bool:
        if self._error is not None:
            raise RuntimeError(f"embedding model failed to load: {self._error}")
        return self._model is not None

    def encode(self, texts: list[str]) -> list[list[float]]:
        if not self.ready:
            raise BackendNotReady(self.name)
        vectors = self._model.encode(texts, convert_to_numpy=True, normalize_embeddings=False)
        return [v.astype(float).tolist() for v in vectors]


class CausalLmGenerator(GeneratorBackend):
    """Greedy decoding with a local causal language model (lazy load).

    Works with any instruction-tuned checkpoint transformers can load;
    compact 7B-class models keep GPU memory needs around 8 GB.
    """

    def __init__(self, model_name: str):
        self.name = model_name
        self._model = None
        self._tokenizer = None
        self._error: Exception | None = None
        self._lock = threading.Lock()  # inference serialized per instance
        self._thread = threading.Thread(target=self._load, daemon=True)
        self._thread.start()

    def _load(self) -> None:
        try:
            import torch  # noqa: F401
            from transformers import AutoModelForCausalLM, AutoTokenizer

            self._tokenizer = AutoTokenizer.from_pretrained(self.name)
            self._model = AutoModelForCausalLM.from_pretrained(self.name)
        except Exception as e:  # noqa: BLE001
            self._error = e

    @property
    def ready(self) -> bool:
        if self._error is not None:
            raise RuntimeError(f"generator model failed to load: {self._error}")
        return self._model is not None

    def generate(self, prompt: str, max_tokens: int, temperature: float, seed: int | None) -> str:
        if not self.ready:
            raise BackendNotReady(self.name)
        import torch
        from transformers import set_seed

        if seed is not None:
            set_seed(seed)
        with self._lock:
            inputs = self._tokenizer(prompt, return_tensors="pt")
            with torch.no_grad():
                output = self._model.generate(
                    **inputs,
                    max_new_tokens=max_tokens,
                    do_sample=temperature > 0,
                    temperature=temperature if temperature > 0 else None,
                )
            completion = output[0][inputs["input_ids"].shape[1] :]
            return self._tokenizer.decode(completion, skip_special_tokens=True)


def make_embedding_backend(kind: str, model_name: str | None = None) -> EmbeddingBackend:
    """kind: hash (default, weight-free) | sentence-transformers."""
    if kind == "hash":
        return HashedNgramEncoder()
    if kind == "sentence-transformers":
        return SentenceTransformerEncoder(model_name or "sentence-transformers/all-MiniLM-L6-v2")
    raise ValueError(f"unknown embedding backend: {kind!r}")


def make_generator_backend(kind: str, model_name: str | None = None) -> GeneratorBackend:
    """kind: extractive (default, weight-free) | causal-lm."""
    if kind == "extractive":
        return ExtractiveGenerator()
    if kind == "causal-lm":
        if not model_name:
            raise ValueError("causal-lm backend needs a model name")
        return CausalLmGenerator(model_name)
    raise ValueError(f"unknown generator backend: {kind!r}")
