"""Dense-embedding providers: remote HTTP service or precomputed-vector files.

The engine never loads transformer weights. Dense vectors come either from
a model server speaking the /embed wire protocol or from a precomputed file:

    dim=<D> count=<N>
    <text-sha256> <D space-separated reals>
    ...

Text keys are sha256 over the NFC-normalized UTF-8 text. Providers cache
per text, so repeated embeddings of identical text hit the backend once.
"""

from __future__ import annotations

import hashlib
import unicodedata
from pathlib import Path

import numpy as np
import requests


class EmbeddingError(RuntimeError):
    """Raised for provider failures: unreachable backend, bad dims, missing texts."""


def text_key(text: str) -> str:
    """sha256 hex digest of the NFC-normalized text."""
    return hashlib.sha256(unicodedata.normalize("NFC", text).encode("utf-8")).hexdigest()


class EmbeddingProvider:
    """Base provider: order-preserving, cached embedding of text batches."""

    def __init__(self, expected_dim: int):
        if expected_dim <= 0:
            raise ValueError("expected_dim must be positive")
        self.expected_dim = expected_dim
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        """One float64 vector per text, in input order; cache consulted first."""
        if not texts:
            raise ValueError("texts must be non-empty")
        keys = [text_key(t) for t in texts]
        missing: dict[str, str] = {}
        for key, text in zip(keys, texts):
            if key not in self._cache and key not in missing:
                missing[key] = text
        if missing:
            fetched = self._fetch(list(missing.values()))
            for key, vec in zip(missing, fetched):
                vec = np.asarray(vec, dtype=np.float64)
                if vec.shape != (self.expected_dim,):
                    raise EmbeddingError(
                        f"provider returned dim {vec.shape[-1] if vec.ndim else 0}, "
                        f"expected {self.expected_dim}"
                    )
                self._cache[key] = vec
        return [self._cache[key] for key in keys]

    def _fetch(self, texts: list[str]) -> list[np.ndarray]:
        raise NotImplementedError


class FileEmbeddingProvider(EmbeddingProvider):
    """Serves vectors from an in-memory table keyed by text hash."""

    def __init__(self, table: dict[str, np.ndarray], expected_dim: int):
        super().__init__(expected_dim)
        self.table = table

    def _fetch(self, texts: list[str]) -> list[np.ndarray]:
        vectors = []
        for text in texts:
            key = text_key(text)
            if key not in self.table:
                raise EmbeddingError(f"no precomputed vector for text hash {key}")
            vectors.append(self.table[key])
        return vectors


class RemoteEmbeddingProvider(EmbeddingProvider):
    """Calls POST <endpoint>/embed with {"texts": [...]} in batches."""

    def __init__(
        self,
        endpoint: str,
        expected_dim: int,
        timeout: float = 30.0,
        batch_size: int = 32,
    ):
        super().__init__(expected_dim)
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.batch_size = batch_size

    def _fetch(self, texts: list[str]) -> list[np.ndarray]:
        vectors: list[np.ndarray] = []
        for start in range(0, len(texts), self.batch_size):
            batch = texts[start : start + self.batch_size]
            try:
                resp = requests.post(
                    f"{self.endpoint}/embed", json={"texts": batch}, timeout=self.timeout
                )
                resp.raise_for_status()
                payload = resp.json()
            except requests.RequestException as e:
                raise EmbeddingError(f"embedding endpoint failed: {e}") from e
            got = payload.get("vectors", [])
            if len(got) != len(batch):
                raise EmbeddingError(
                    f"endpoint returned {len(got)} vectors for {len(batch)} texts"
                )
            if int(payload.get("dim", -1)) != self.expected_dim:
                raise EmbeddingError(
                    f"endpoint dim {payload.get('dim')} does not match expected {self.expected_dim}"
                )
            vectors.extend(np.asarray(v, dtype=np.float64) for v in got)
        return vectors


def embed_texts(provider: EmbeddingProvider, texts: list[str]) -> list[np.ndarray]:
    return provider.embed(texts)


def load_precomputed(path: str | Path) -> FileEmbeddingProvider:
    """Parse a precomputed-vector file into a file-backed provider."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise EmbeddingError(f"{path}: empty precomputed-vector file")
    header = lines[0].split()
    try:
        fields = dict(part.split("=", 1) for part in header)
        dim = int(fields["dim"])
        count = int(fields["count"])
    except (ValueError, KeyError) as e:
        raise EmbeddingError(f"{path}: malformed header {lines[0]!r}") from e
    rows = [line for line in lines[1:] if line.strip()]
    if len(rows) != count:
        raise EmbeddingError(f"{path}: header says count={count} but found {len(rows)} rows")
    table: dict[str, np.ndarray] = {}
    for rowno, line in enumerate(rows, start=2):
        parts = line.split()
        if len(parts) != dim + 1:
            raise EmbeddingError(
                f"{path}: line {rowno} has {len(parts) - 1} values, expected {dim}"
            )
        try:
            table[parts[0]] = np.array([float(x) for x in parts[1:]], dtype=np.float64)
        except ValueError as e:
            raise EmbeddingError(f"{path}: line {rowno} has a non-numeric value") from e
    return FileEmbeddingProvider(table=table, expected_dim=dim)


def dump_precomputed(path: str | Path, texts: list[str], vectors: list[np.ndarray]) -> None:
    """Write a precomputed-vector file for the given texts (full float precision)."""
    if len(texts) != len(vectors):
        raise ValueError("texts and vectors must align")
    if not vectors:
        raise ValueError("nothing to write")
    dim = len(vectors[0])
    seen: dict[str, None] = {}
    lines = [f"dim={dim} count=0"]
    for text, vec in zip(texts, vectors):
        if len(vec) != dim:
            raise ValueError("inconsistent vector lengths")
        key = text_key(text)
        if key in seen:
            continue
        seen[key] = None
        lines.append(key + " " + " ".join(f"{float(x):.17g}" for x in vec))
    lines[0] = f"dim={dim} count={len(lines) - 1}"
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
