"""Embedding-provider tests: file format, caching, order preservation."""

import numpy as np
import pytest

from augrag.embed import (
    EmbeddingError,
    EmbeddingProvider,
    FileEmbeddingProvider,
    dump_precomputed,
    embed_texts,
    load_precomputed,
    text_key,
)


class CountingProvider(EmbeddingProvider):
    """Deterministic hash-free provider that counts backend fetches."""

    def __init__(self, dim=4):
        super().__init__(dim)
        self.fetches = 0

    def _fetch(self, texts):
        self.fetches += len(texts)
        rng_vectors = []
        for t in texts:
            rng = np.random.default_rng(abs(hash(t)) % (2**32))
            rng_vectors.append(rng.standard_normal(self.expected_dim))
        return rng_vectors


class TestEmbedTexts:
    def test_order_preserved(self):
        provider = CountingProvider()
        texts = ["alpha", "beta", "gamma"]
        vectors = embed_texts(provider, texts)
        again = embed_texts(provider, list(reversed(texts)))
        assert np.array_equal(vectors[0], again[2])
        assert np.array_equal(vectors[2], again[0])

    def test_cache_hits_backend_once(self):
        provider = CountingProvider()
        embed_texts(provider, ["same text", "same text"])
        assert provider.fetches == 1
        embed_texts(provider, ["same text"])
        assert provider.fetches == 1

    def test_cache_transparency(self):
        cold = CountingProvider()
        warm = CountingProvider()
        embed_texts(warm, ["one", "two"])
        a = embed_texts(cold, ["one", "two"])
        b = embed_texts(warm, ["one", "two"])
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_empty_texts_rejected(self):
        with pytest.raises(ValueError):
            embed_texts(CountingProvider(), [])

    def test_dimension_mismatch(self):
        class BadProvider(EmbeddingProvider):
            def _fetch(self, texts):
                return [np.zeros(3) for _ in texts]

        with pytest.raises(EmbeddingError, match="dim"):
            embed_texts(BadProvider(expected_dim=8), ["x"])


class TestFileProvider:
    def test_lookup(self):
        texts = ["a text", "b text", "c text"]
        table = {text_key(t): np.full(2, float(i)) for i, t in enumerate(texts)}
        provider = FileEmbeddingProvider(table, expected_dim=2)
        vectors = provider.embed(texts)
        assert [v[0] for v in vectors] == [0.0, 1.0, 2.0]

    def test_missing_text_names_hash(self):
        provider = FileEmbeddingProvider({}, expected_dim=2)
        with pytest.raises(EmbeddingError, match=text_key("absent")):
            provider.embed(["absent"])


class TestPrecomputedFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        texts = [f"text number {i}" for i in range(10)]
        vectors = [rng.standard_normal(8) for _ in texts]
        path = tmp_path / "vectors.txt"
        dump_precomputed(path, texts, vectors)
        provider = load_precomputed(path)
        assert provider.expected_dim == 8
        got = provider.embed(texts)
        for a, b in zip(vectors, got):
            assert np.array_equal(a, b)

    def test_short_row_names_line(self, tmp_path):
        path = tmp_path / "vectors.txt"
        path.write_text("dim=3 count=2\n" + text_key("a") + " 1 2 3\n" + text_key("b") + " 1 2\n")
        with pytest.raises(EmbeddingError, match="line 3"):
            load_precomputed(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "vectors.txt"
        path.write_text("")
        with pytest.raises(EmbeddingError, match="empty"):
            load_precomputed(path)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "vectors.txt"
        path.write_text("vectors follow\n")
        with pytest.raises(EmbeddingError, match="header"):
            load_precomputed(path)

    def test_count_mismatch(self, tmp_path):
        path = tmp_path / "vectors.txt"
        path.write_text("dim=2 count=2\n" + text_key("a") + " 1 2\n")
        with pytest.raises(EmbeddingError, match="count"):
            load_precomputed(path)
