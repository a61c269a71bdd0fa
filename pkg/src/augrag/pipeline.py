"""Experiment runner: every (query, regime, retriever) combination to a run file.

A RunSpec names the corpus, the queries, the regimes and retrievers to
cross, the model/client configurations, and the seeds. One run emits a
jsonl run file of answer records (one per combination, no-RAG collapsed
to a single record per query) plus a retrieval trace file. Stage failures
never abort the run; the failing combination gets an error record.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import embed as embed_mod
from . import pvec as pvec_mod
from . import reduce as reduce_mod
from . import retrieval
from . import tfidf as tfidf_mod
from .augment import (
    AugmentTemplate,
    DEFAULT_TEMPLATE,
    LlmClient,
    RemoteLlmClient,
    StubLlmClient,
)
from .corpus import ChunkConfig, chunk_corpus, load_documents
from .generate import Answer, GenConfig, MODES, RETRIEVERS, build_prompt, generate_answer

logger = logging.getLogger(__name__)


@dataclass
class RunSpec:
    corpus_path: str
    queries: list[tuple[str, str]]  # (query_id, text)
    regimes: list[str] = field(default_factory=lambda: list(MODES))
    retrievers: list[str] = field(default_factory=lambda: list(RETRIEVERS))
    corpus_format: str = "plain"
    chunk_cfg: ChunkConfig = field(default_factory=ChunkConfig)
    retrieval_cfg: retrieval.RetrievalConfig = field(default_factory=retrieval.RetrievalConfig)
    gen_cfg: GenConfig = field(default_factory=GenConfig)
    pvec_cfg: pvec_mod.PvConfig = field(default_factory=lambda: pvec_mod.PvConfig(epochs=40))
    reducer_cfg: reduce_mod.ReducerConfig = field(default_factory=reduce_mod.ReducerConfig)
    infer_epochs: int = 100
    infer_seed: int = 0
    augmenter: LlmClient | None = None
    augment_template: AugmentTemplate = field(default_factory=lambda: DEFAULT_TEMPLATE)
    augment_fallback: str = "passthrough"
    generator: LlmClient = field(default_factory=StubLlmClient)
    embedding_provider: embed_mod.EmbeddingProvider | None = None

    def __post_init__(self) -> None:
        if not self.queries:
            raise ValueError("run spec needs at least one query")
        for regime in self.regimes:
            if regime not in MODES:
                raise ValueError(f"unknown regime: {regime!r}")
        for retriever in self.retrievers:
            if retriever not in RETRIEVERS:
                raise ValueError(f"unknown retriever: {retriever!r}")


def _client_from_config(cfg: dict | None) -> LlmClient | None:
    if cfg is None:
        return None
    kind = cfg.get("kind", "stub")
    if kind == "stub":
        if "rules_path" in cfg:
            client = StubLlmClient.from_file(cfg["rules_path"])
            if "default" in cfg:
                client.default = cfg["default"]
            return client
        return StubLlmClient(
            reply=cfg.get("reply", "{prompt}"),
            rules=cfg.get("rules"),
            default=cfg.get("default"),
        )
    if kind == "remote":
        return RemoteLlmClient(
            endpoint=cfg["endpoint"],
            max_tokens=int(cfg.get("max_tokens", 256)),
            temperature=float(cfg.get("temperature", 0.0)),
            timeout=float(cfg.get("timeout", 600.0)),
            retries=int(cfg.get("retries", 2)),
            seed=cfg.get("seed"),
        )
    raise ValueError(f"unknown client kind: {kind!r}")


def _provider_from_config(cfg: dict | None) -> embed_mod.EmbeddingProvider | None:
    if cfg is None:
        return None
    kind = cfg.get("kind")
    if kind == "file":
        return embed_mod.load_precomputed(cfg["path"])
    if kind == "remote":
        return embed_mod.RemoteEmbeddingProvider(
            endpoint=cfg["endpoint"],
            expected_dim=int(cfg["expected_dim"]),
            timeout=float(cfg.get("timeout", 30.0)),
            batch_size=int(cfg.get("batch_size", 32)),
        )
    raise ValueError(f"unknown embedding provider kind: {kind!r}")


def load_spec(path: str | Path) -> RunSpec:
    """Build a RunSpec from a json (or tomllib-parseable toml) config file."""
    path = Path(path)
    if path.suffix == ".toml":
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib

        cfg = tomllib.loads(path.read_text(encoding="utf-8"))
    else:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    corpus = cfg["corpus"]
    seeds = cfg.get("seeds", {})
    pv = dict(cfg.get("pvec", {}))
    pv.setdefault("seed", seeds.get("pvec", 0))
    rd = dict(cfg.get("reducer", {}))
    rd.setdefault("seed", seeds.get("reducer", 0))
    return RunSpec(
        corpus_path=corpus["path"],
        corpus_format=corpus.get("format", "plain"),
        chunk_cfg=ChunkConfig(min_chars=int(corpus.get("min_chars", 15))),
        queries=[(q["id"], q["text"]) for q in cfg["queries"]],
        regimes=cfg.get("regimes", list(MODES)),
        retrievers=cfg.get("retrievers", list(RETRIEVERS)),
        retrieval_cfg=retrieval.RetrievalConfig(k=int(cfg.get("k", 3))),
        gen_cfg=GenConfig(max_words=int(cfg.get("max_words", 60))),
        pvec_cfg=pvec_mod.PvConfig(**pv) if pv else pvec_mod.PvConfig(epochs=40),
        reducer_cfg=reduce_mod.ReducerConfig(**rd) if rd else reduce_mod.ReducerConfig(),
        infer_epochs=int(cfg.get("infer_epochs", 100)),
        infer_seed=int(seeds.get("infer", 0)),
        augmenter=_client_from_config(cfg.get("augmenter")),
        augment_template=(
            AugmentTemplate(template=cfg["augment_template"], name="spec")
            if "augment_template" in cfg
            else DEFAULT_TEMPLATE
        ),
        augment_fallback=cfg.get("augment_fallback", "passthrough"),
        generator=_client_from_config(cfg.get("generator")) or StubLlmClient(),
        embedding_provider=_provider_from_config(cfg.get("embeddings")),
    )


def _build_pipelines(spec: RunSpec) -> tuple[list, dict[str, retrieval.RetrievalPipeline]]:
    docs = load_documents(spec.corpus_path, spec.corpus_format)
    chunks = chunk_corpus(docs, spec.chunk_cfg)
    if not chunks:
        raise ValueError("corpus produced no chunks")
    pipelines: dict[str, retrieval.RetrievalPipeline] = {}
    for retriever in spec.retrievers:
        if retriever == "tfidf":
            model = tfidf_mod.fit(chunks)
            index = retrieval.build_index(
                [(c.chunk_id, tfidf_mod.transform(model, c.text)) for c in chunks], "tfidf"
            )
            encoder = lambda text, m=model: tfidf_mod.transform(m, text)
        elif retriever == "pvec":
            model = pvec_mod.train(chunks, spec.pvec_cfg)
            index = retrieval.build_index(
                list(zip(model.chunk_ids, model.doc_vectors)), "pvec"
            )
            encoder = lambda text, m=model: pvec_mod.infer_vector(
                m, text, infer_epochs=spec.infer_epochs, seed=spec.infer_seed
            )
        elif retriever == "bert_umap":
            if spec.embedding_provider is None:
                raise ValueError("bert_umap retriever needs an embedding provider")
            vectors = spec.embedding_provider.embed([c.text for c in chunks])
            reducer = reduce_mod.fit(vectors, spec.reducer_cfg)
            index = retrieval.build_index(
                [(c.chunk_id, reducer.embedding[i]) for i, c in enumerate(chunks)],
                "dense_reduced",
                metric="euclidean",
            )
            encoder = lambda text, r=reducer, p=spec.embedding_provider: reduce_mod.transform(
                r, p.embed([text])[0]
            )
        else:
            raise ValueError(f"unknown retriever: {retriever!r}")
        pipelines[retriever] = retrieval.RetrievalPipeline(
            chunks=chunks,
            index=index,
            encoder=encoder,
            augment_client=spec.augmenter,
            augment_template=spec.augment_template,
            augment_fallback=spec.augment_fallback,
        )
    return chunks, pipelines


def _record(query_id: str, answer: Answer, error: str | None = None) -> dict:
    rec = answer.to_dict()
    rec["query_id"] = query_id
    rec["error"] = error
    return rec


def _error_record(query_id: str, query: str, mode: str, retriever: str, error: str) -> dict:
    return {
        "query_id": query_id,
        "query": query,
        "mode": mode,
        "retriever": retriever,
        "text": "",
        "passages_used": [],
        "error": error,
    }


def run(spec: RunSpec, out_path: str | Path, trace_path: str | Path | None = None) -> int:
    """Execute the run; returns the number of records written."""
    build_error: str | None = None
    pipelines: dict[str, retrieval.RetrievalPipeline] = {}
    try:
        _, pipelines = _build_pipelines(spec)
    except Exception as e:  # partial-failure policy: every combination errors
        build_error = str(e)
        logger.error("pipeline build failed: %s", e)

    rag_modes = [m for m in ("rag_raw", "rag_augmented") if m in spec.regimes]
    records: list[dict] = []
    if trace_path is not None:
        Path(trace_path).write_text("", encoding="utf-8")
    for query_id, query in spec.queries:
        if "no_rag" in spec.regimes:
            try:
                prompt = build_prompt(query, [], spec.gen_cfg)
                answer = generate_answer(
                    spec.generator, prompt, query, mode="no_rag", retriever="none"
                )
                records.append(_record(query_id, answer))
            except Exception as e:
                records.append(_error_record(query_id, query, "no_rag", "none", str(e)))
        for mode in rag_modes:
            retrieval_mode = "augmented" if mode == "rag_augmented" else "raw"
            for retriever in spec.retrievers:
                if build_error is not None:
                    records.append(_error_record(query_id, query, mode, retriever, build_error))
                    continue
                try:
                    outcome = retrieval.retrieve(
                        pipelines[retriever], query, retrieval_mode, spec.retrieval_cfg
                    )
                    if trace_path is not None:
                        retrieval.write_trace(
                            trace_path, query_id, query, mode, retriever, outcome
                        )
                    prompt = build_prompt(query, outcome.passages, spec.gen_cfg)
                    answer = generate_answer(
                        spec.generator,
                        prompt,
                        query,
                        mode=mode,
                        retriever=retriever,
                        passages=outcome.passages,
                    )
                    records.append(_record(query_id, answer))
                except Exception as e:
                    logger.warning("combination (%s, %s, %s) failed: %s", query_id, mode, retriever, e)
                    records.append(_error_record(query_id, query, mode, retriever, str(e)))
    with open(out_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
    return len(records)
