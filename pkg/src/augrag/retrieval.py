"""Exhaustive top-k similarity search and the retrieve-passages pipeline.

Every query scores against every indexed vector (no approximate search);
ranking is by descending score with ties broken by ascending chunk id, so
results are fully deterministic. Retrieved chunks expand into +/-1 context
windows and overlapping windows merge into single passages.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .augment import AugmentTemplate, DEFAULT_TEMPLATE, LlmClient, augment_query
from .corpus import Chunk, ContextPassage, expand_window
from .tfidf import SparseVector

ENCODINGS = ("tfidf", "pvec", "dense_reduced", "dense_full")
METRICS = ("cosine", "euclidean")


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 3

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class RetrievalResult:
    hits: list[tuple[int, float]]  # (chunk_id, score), scores non-increasing
    query_repr: object  # the vector actually searched
    mode: str = "raw"


@dataclass
class VectorIndex:
    """Immutable searchable collection of homogeneous vectors keyed by chunk id.

    Sparse entries live in one CSR matrix; a query is scored by a
    matrix-vector product that touches every stored weight, so per-query
    cost scales with (entry count x average terms per entry).
    """

    encoding: str
    metric: str
    ids: np.ndarray  # (N,) chunk ids
    matrix: np.ndarray | None = None  # dense N x d
    norms: np.ndarray | None = None
    sparse: sp.csr_matrix | None = None

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def is_sparse(self) -> bool:
        return self.sparse is not None


def build_index(
    pairs: list[tuple[int, object]], encoding: str, metric: str = "cosine"
) -> VectorIndex:
    """Build an index from (chunk_id, vector) pairs; vectors must be all sparse or all dense."""
    if encoding not in ENCODINGS:
        raise ValueError(f"unknown encoding: {encoding!r}")
    if metric not in METRICS:
        raise ValueError(f"unknown metric: {metric!r}")
    if not pairs:
        raise ValueError("cannot build an index from no vectors")
    ids = [cid for cid, _ in pairs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate chunk ids in index input")
    vectors = [v for _, v in pairs]
    sparse_flags = [isinstance(v, SparseVector) for v in vectors]
    if any(sparse_flags) and not all(sparse_flags):
        raise TypeError("cannot mix sparse and dense vectors in one index")
    ids_arr = np.array(ids, dtype=np.int64)
    if all(sparse_flags):
        if metric != "cosine":
            raise ValueError("sparse indexes support only the cosine metric")
        n_cols = 1 + max((max(v.indices) for v in vectors if v.indices), default=0)
        rows, cols, data = [], [], []
        norms = np.empty(len(vectors))
        for row, v in enumerate(vectors):
            rows.extend([row] * len(v.indices))
            cols.extend(v.indices)
            data.extend(v.values)
            norms[row] = v.norm()
        csr = sp.coo_matrix(
            (data, (rows, cols)), shape=(len(vectors), n_cols), dtype=np.float64
        ).tocsr()
        return VectorIndex(encoding=encoding, metric=metric, ids=ids_arr, sparse=csr, norms=norms)
    matrix = np.asarray(vectors, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("dense vectors must share one dimension")
    norms = np.linalg.norm(matrix, axis=1)
    return VectorIndex(encoding=encoding, metric=metric, ids=ids_arr, matrix=matrix, norms=norms)


def _scores(index: VectorIndex, query) -> np.ndarray:
    if index.is_sparse:
        if not isinstance(query, SparseVector):
            raise TypeError("sparse index requires a SparseVector query")
        qnorm = query.norm()
        if qnorm == 0.0:
            return np.zeros(len(index))
        n_cols = index.sparse.shape[1]
        buffer = np.zeros(n_cols)
        for tid, w in zip(query.indices, query.values):
            if tid < n_cols:  # query-only terms match nothing in the index
                buffer[tid] = w
        dots = index.sparse @ buffer
        denom = index.norms * qnorm
        return np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
    if isinstance(query, SparseVector):
        raise TypeError("dense index requires a dense query vector")
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (index.matrix.shape[1],):
        raise ValueError(
            f"query dimension {q.shape} does not match index dimension {index.matrix.shape[1]}"
        )
    if index.metric == "euclidean":
        return -np.linalg.norm(index.matrix - q, axis=1)
    qnorm = float(np.linalg.norm(q))
    if qnorm == 0.0:
        return np.zeros(len(index))
    dots = index.matrix @ q
    denom = index.norms * qnorm
    return np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)


def top_k(index: VectorIndex, query, k: int, mode: str = "raw") -> RetrievalResult:
    """Exhaustive scoring; top k hits by (score desc, chunk id asc); clamps k to index size."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = _scores(index, query)
    order = np.lexsort((index.ids, -scores))[: min(k, len(index))]
    hits = [(int(index.ids[i]), float(scores[i])) for i in order]
    return RetrievalResult(hits=hits, query_repr=query, mode=mode)


def merge_passages(passages: list[ContextPassage]) -> list[ContextPassage]:
    """Merge windows with overlapping members: union ids, keep the max score.

    The merged passage keeps the best-scoring constituent's center. Output
    ordered by (score desc, first member id asc).
    """
    remaining = sorted(passages, key=lambda p: min(p.member_chunk_ids))
    merged: list[ContextPassage] = []
    for p in remaining:
        if merged and set(merged[-1].member_chunk_ids) & set(p.member_chunk_ids):
            last = merged[-1]
            members = sorted(set(last.member_chunk_ids) | set(p.member_chunk_ids))
            best = last if last.score >= p.score else p
            merged[-1] = ContextPassage(
                center_chunk_id=best.center_chunk_id,
                member_chunk_ids=members,
                text="",  # rebuilt by the caller from chunk texts
                score=max(last.score, p.score),
            )
        else:
            merged.append(p)
    return sorted(merged, key=lambda p: (-p.score, min(p.member_chunk_ids)))


@dataclass
class RetrievalPipeline:
    """Everything one retriever needs: corpus chunks, its index, and an encoder."""

    chunks: list[Chunk]
    index: VectorIndex
    encoder: Callable[[str], object]  # text -> vector in the index's space
    augment_client: LlmClient | None = None
    augment_template: AugmentTemplate = field(default_factory=lambda: DEFAULT_TEMPLATE)
    augment_fallback: str = "passthrough"


@dataclass
class RetrievalOutcome:
    passages: list[ContextPassage]
    hits: RetrievalResult
    pseudo_document: str | None  # the text actually encoded in augmented mode
    augmented: bool  # False in raw mode or after a passthrough fallback


def retrieve(
    pipeline: RetrievalPipeline,
    query_text: str,
    mode: str = "raw",
    cfg: RetrievalConfig = RetrievalConfig(),
) -> RetrievalOutcome:
    """Encode the query (augmenting first if asked), search, expand, and merge."""
    if mode not in ("raw", "augmented"):
        raise ValueError(f"unknown retrieval mode: {mode!r}")
    pseudo_document = None
    augmented = False
    search_text = query_text
    if mode == "augmented":
        if pipeline.augment_client is None:
            raise ValueError("augmented mode needs an augmenter client")
        result = augment_query(
            pipeline.augment_client,
            query_text,
            template=pipeline.augment_template,
            fallback=pipeline.augment_fallback,
        )
        search_text = result.text
        augmented = result.augmented
        pseudo_document = result.text if result.augmented else None
    vector = pipeline.encoder(search_text)
    hits = top_k(pipeline.index, vector, cfg.k, mode=mode)
    windows = [expand_window(pipeline.chunks, cid, score=score) for cid, score in hits.hits]
    passages = merge_passages(windows)
    texts = {c.chunk_id: c.text for c in pipeline.chunks}
    for p in passages:
        p.text = " ".join(texts[cid] for cid in p.member_chunk_ids)
    return RetrievalOutcome(
        passages=passages, hits=hits, pseudo_document=pseudo_document, augmented=augmented
    )


def retrieve_passages(
    pipeline: RetrievalPipeline,
    query_text: str,
    mode: str = "raw",
    cfg: RetrievalConfig = RetrievalConfig(),
) -> list[ContextPassage]:
    return retrieve(pipeline, query_text, mode, cfg).passages


INDEX_FORMAT = "augrag.index/1"


def save_index(index: VectorIndex, path: str | Path) -> None:
    meta = {
        "format": INDEX_FORMAT,
        "encoding": index.encoding,
        "metric": index.metric,
        "kind": "sparse" if index.is_sparse else "dense",
    }
    arrays = {
        "meta": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
        "ids": index.ids,
        "norms": index.norms,
    }
    if index.is_sparse:
        arrays.update(
            data=index.sparse.data,
            indices=index.sparse.indices,
            indptr=index.sparse.indptr,
            shape=np.array(index.sparse.shape, dtype=np.int64),
        )
    else:
        arrays["matrix"] = index.matrix
    np.savez(path, **arrays)


def load_index(path: str | Path) -> VectorIndex:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("format") != INDEX_FORMAT:
            raise ValueError(f"unsupported index format: {meta.get('format')!r}")
        if meta["kind"] == "sparse":
            csr = sp.csr_matrix(
                (data["data"], data["indices"], data["indptr"]),
                shape=tuple(data["shape"]),
            )
            return VectorIndex(
                encoding=meta["encoding"], metric=meta["metric"],
                ids=data["ids"], sparse=csr, norms=data["norms"],
            )
        return VectorIndex(
            encoding=meta["encoding"], metric=meta["metric"],
            ids=data["ids"], matrix=data["matrix"], norms=data["norms"],
        )


def write_trace(
    path,
    query_id: str,
    query: str,
    mode: str,
    retriever: str,
    outcome: RetrievalOutcome,
) -> None:
    """Append one retrieval trace record (jsonl) for the evaluation harness."""
    record = {
        "query_id": query_id,
        "query": query,
        "mode": mode,
        "retriever": retriever,
        "pseudo_document": outcome.pseudo_document,
        "augmented": outcome.augmented,
        "hits": [[cid, score] for cid, score in outcome.hits.hits],
        "passages": [list(p.member_chunk_ids) for p in outcome.passages],
    }
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
