"""Command-line surface: ingest, fit/train, embed, reduce, index, query, run, eval, bench.

Exit codes: 0 success, 1 user error (bad arguments or inputs), 2 internal
error. Every verb supports --json for machine-readable output on stdout.
Environment: AUGRAG_MODEL_ENDPOINT (default remote endpoint for augmenter,
generator, and embeddings), AUGRAG_LOG (logging level).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import cost as cost_mod
from . import embed as embed_mod
from . import evaluate as evaluate_mod
from . import pipeline as pipeline_mod
from . import pvec as pvec_mod
from . import reduce as reduce_mod
from . import retrieval as retrieval_mod
from . import tfidf as tfidf_mod
from .augment import AugmentTemplate, DEFAULT_TEMPLATE, RemoteLlmClient, StubLlmClient
from .corpus import ChunkConfig, chunk_corpus, dump_chunks, load_chunks, load_documents
from .generate import GenConfig, build_prompt, generate_answer

logger = logging.getLogger(__name__)


class CliError(Exception):
    """User-facing error: prints the message and exits 1."""


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload, ensure_ascii=False, sort_keys=True))
    else:
        print(human)


def _cmd_ingest(args) -> None:
    docs = load_documents(args.input, args.format)
    chunks = chunk_corpus(docs, ChunkConfig(min_chars=args.min_chars))
    dump_chunks(chunks, args.out)
    _emit(
        args,
        {"documents": len(docs), "chunks": len(chunks), "out": str(args.out)},
        f"ingested {len(docs)} documents into {len(chunks)} chunks -> {args.out}",
    )


def _cmd_fit_tfidf(args) -> None:
    chunks = load_chunks(args.chunks)
    model = tfidf_mod.fit(chunks)
    tfidf_mod.save_model(model, args.out)
    _emit(
        args,
        {"chunks": len(chunks), "vocabulary": len(model.vocab), "out": str(args.out)},
        f"fitted tfidf over {len(chunks)} chunks ({len(model.vocab)} terms) -> {args.out}",
    )


def _cmd_train_pvec(args) -> None:
    chunks = load_chunks(args.chunks)
    cfg = pvec_mod.PvConfig(dim=args.dim, epochs=args.epochs, seed=args.seed)
    model = pvec_mod.train(chunks, cfg)
    pvec_mod.save_model(model, args.out)
    _emit(
        args,
        {
            "chunks": len(chunks),
            "dim": cfg.dim,
            "epochs": cfg.epochs,
            "final_loss": model.epoch_losses[-1],
            "out": str(args.out),
        },
        f"trained paragraph vectors (dim={cfg.dim}, epochs={cfg.epochs}, "
        f"final loss {model.epoch_losses[-1]:.4f}) -> {args.out}",
    )


def _make_provider(spec: str) -> embed_mod.EmbeddingProvider:
    if spec.startswith("file:"):
        return embed_mod.load_precomputed(spec[len("file:") :])
    if spec.startswith("remote:"):
        rest = spec[len("remote:") :]
        endpoint, _, dim = rest.rpartition("@")
        if not endpoint:
            raise CliError("remote provider spec must be remote:<endpoint>@<dim>")
        return embed_mod.RemoteEmbeddingProvider(endpoint, expected_dim=int(dim))
    raise CliError(f"unknown provider spec: {spec!r} (use file:<path> or remote:<url>@<dim>)")


def _cmd_embed(args) -> None:
    chunks = load_chunks(args.chunks)
    provider = _make_provider(args.provider)
    texts = [c.text for c in chunks]
    vectors = provider.embed(texts)
    embed_mod.dump_precomputed(args.out, texts, vectors)
    _emit(
        args,
        {"texts": len(texts), "dim": provider.expected_dim, "out": str(args.out)},
        f"embedded {len(texts)} chunks at dim {provider.expected_dim} -> {args.out}",
    )


def _cmd_reduce(args) -> None:
    chunks = load_chunks(args.chunks)
    provider = embed_mod.load_precomputed(args.vectors)
    matrix = np.array(provider.embed([c.text for c in chunks]))
    cfg = reduce_mod.ReducerConfig(
        out_dim=args.dim, n_neighbors=args.neighbors, layout_epochs=args.epochs, seed=args.seed
    )
    reducer = reduce_mod.fit(matrix, cfg)
    reduce_mod.save_reducer(reducer, args.out)
    _emit(
        args,
        {"points": len(chunks), "out_dim": cfg.out_dim, "out": str(args.out)},
        f"reduced {len(chunks)} vectors to {cfg.out_dim}-d -> {args.out}",
    )


def _cmd_index(args) -> None:
    chunks = load_chunks(args.chunks)
    if args.encoding == "tfidf":
        model = tfidf_mod.load_model(args.model)
        pairs = [(c.chunk_id, tfidf_mod.transform(model, c.text)) for c in chunks]
        index = retrieval_mod.build_index(pairs, "tfidf")
    elif args.encoding == "pvec":
        model = pvec_mod.load_model(args.model)
        pairs = list(zip(model.chunk_ids, model.doc_vectors))
        index = retrieval_mod.build_index(pairs, "pvec")
    elif args.encoding == "bert_umap":
        reducer = reduce_mod.load_reducer(args.model)
        pairs = [(c.chunk_id, reducer.embedding[i]) for i, c in enumerate(chunks)]
        index = retrieval_mod.build_index(pairs, "dense_reduced", metric="euclidean")
    else:
        raise CliError(f"unknown encoding: {args.encoding!r}")
    retrieval_mod.save_index(index, args.out)
    _emit(
        args,
        {"encoding": args.encoding, "size": len(index), "out": str(args.out)},
        f"built {args.encoding} index over {len(index)} chunks -> {args.out}",
    )


def _build_query_pipeline(args) -> retrieval_mod.RetrievalPipeline:
    chunks = load_chunks(args.chunks)
    index = retrieval_mod.load_index(args.index)
    if index.encoding == "tfidf":
        model = tfidf_mod.load_model(args.model)
        encoder = lambda text: tfidf_mod.transform(model, text)
    elif index.encoding == "pvec":
        model = pvec_mod.load_model(args.model)
        encoder = lambda text: pvec_mod.infer_vector(
            model, text, infer_epochs=args.infer_epochs, seed=args.seed
        )
    else:
        reducer = reduce_mod.load_reducer(args.model)
        if not args.provider:
            raise CliError("reduced dense index needs --provider for query encoding")
        provider = _make_provider(args.provider)
        encoder = lambda text: reduce_mod.transform(reducer, provider.embed([text])[0])
    augmenter = None
    if args.mode == "augmented":
        if args.augmenter:
            if args.augmenter.startswith("stub:"):
                augmenter = StubLlmClient.from_file(args.augmenter[len("stub:") :])
            elif args.augmenter.startswith("remote:"):
                augmenter = RemoteLlmClient(endpoint=args.augmenter[len("remote:") :])
            else:
                raise CliError("augmenter spec must be stub:<rules.json> or remote:<url>")
        else:
            endpoint = os.environ.get("AUGRAG_MODEL_ENDPOINT")
            if not endpoint:
                raise CliError(
                    "augmented mode needs --augmenter or AUGRAG_MODEL_ENDPOINT"
                )
            augmenter = RemoteLlmClient(endpoint=endpoint)
    template = (
        AugmentTemplate(template=args.template, name="cli") if args.template else DEFAULT_TEMPLATE
    )
    return retrieval_mod.RetrievalPipeline(
        chunks=chunks,
        index=index,
        encoder=encoder,
        augment_client=augmenter,
        augment_template=template,
    )


def _run_one_query(pipe, args, query: str) -> dict:
    outcome = retrieval_mod.retrieve(
        pipe, query, args.mode, retrieval_mod.RetrievalConfig(k=args.k)
    )
    return {
        "query": query,
        "mode": args.mode,
        "augmented": outcome.augmented,
        "pseudo_document": outcome.pseudo_document,
        "hits": [[cid, score] for cid, score in outcome.hits.hits],
        "passages": [
            {
                "center_chunk_id": p.center_chunk_id,
                "member_chunk_ids": list(p.member_chunk_ids),
                "score": p.score,
                "text": p.text,
            }
            for p in outcome.passages
        ],
    }


def _print_passages(payload: dict) -> None:
    if payload["pseudo_document"]:
        print(f"pseudo-document: {payload['pseudo_document']}")
    for rank, p in enumerate(payload["passages"], start=1):
        print(f"[{rank}] score={p['score']:.4f} chunks={p['member_chunk_ids']}")
        print(f"    {p['text']}")


def _cmd_query(args) -> None:
    pipe = _build_query_pipeline(args)
    if args.repl:
        for line in sys.stdin:
            query = line.strip()
            if not query:
                continue
            payload = _run_one_query(pipe, args, query)
            if args.json:
                print(json.dumps(payload, ensure_ascii=False, sort_keys=True), flush=True)
            else:
                _print_passages(payload)
        return
    if not args.query:
        raise CliError("provide a query argument or --repl")
    payload = _run_one_query(pipe, args, args.query)
    if args.json:
        print(json.dumps(payload, ensure_ascii=False, sort_keys=True))
    else:
        _print_passages(payload)
        if args.generate:
            generator = StubLlmClient(reply="{prompt}")
            from .corpus import ContextPassage

            passages = [
                ContextPassage(p["center_chunk_id"], p["member_chunk_ids"], p["text"], p["score"])
                for p in payload["passages"]
            ]
            prompt = build_prompt(args.query, passages, GenConfig())
            answer = generate_answer(
                generator, prompt, args.query,
                mode="rag_augmented" if args.mode == "augmented" else "rag_raw",
                retriever=pipe.index.encoding,
                passages=passages,
            )
            print("answer:", answer.text)


def _cmd_run(args) -> None:
    spec = pipeline_mod.load_spec(args.spec)
    count = pipeline_mod.run(spec, args.out, args.trace)
    _emit(
        args,
        {"records": count, "out": str(args.out), "trace": str(args.trace) if args.trace else None},
        f"wrote {count} answer records -> {args.out}",
    )


def _cmd_eval(args) -> None:
    records = evaluate_mod.records_from_files(args.judgments, args.run)
    table = evaluate_mod.aggregate(records)
    if args.out_csv:
        Path(args.out_csv).write_text(table.to_csv(), encoding="utf-8")
    if args.json:
        payload = {
            "cells": {f"{mode}/{retriever}": mean for (mode, retriever), mean in table.cells.items()},
            "counts": {f"{mode}/{retriever}": n for (mode, retriever), n in table.counts.items()},
        }
        print(json.dumps(payload, ensure_ascii=False, sort_keys=True))
    else:
        print(table.render())


def _cmd_bench(args) -> None:
    sizes = [int(s) for s in args.sizes.split(",")]
    reports = []
    for scenario in args.methods.split(","):
        report = cost_mod.run_benchmark(scenario.strip(), sizes, trials=args.trials)
        reports.append(report)
        if args.out:
            mode = "a" if reports[1:] else "w"
            with open(args.out, mode, encoding="utf-8") as fh:
                fh.write(report.to_csv() if args.csv else report.to_gnuplot())
    if args.json:
        print(
            json.dumps(
                [
                    {
                        "method": r.method,
                        "sizes": r.sizes,
                        "timings": r.timings,
                        "fitted_exponent": r.fitted_exponent,
                        "r_squared": r.r_squared,
                    }
                    for r in reports
                ],
                sort_keys=True,
            )
        )
    else:
        print(f"{'method':<22}{'exponent':>10}{'r^2':>8}")
        for r in reports:
            print(f"{r.method:<22}{r.fitted_exponent:>10.3f}{r.r_squared:>8.3f}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="augrag",
        description="query-augmented retrieval-augmented-generation engine",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("ingest", help="chunk a corpus into a jsonl chunk file")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["plain", "jsonl"], default="plain")
    p.add_argument("--min-chars", type=int, default=15)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("fit-tfidf", help="fit a tfidf model over chunks")
    p.add_argument("--chunks", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit_tfidf)

    p = sub.add_parser("train-pvec", help="train paragraph vectors over chunks")
    p.add_argument("--chunks", required=True)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_pvec)

    p = sub.add_parser("embed", help="embed chunks through a provider into a vector file")
    p.add_argument("--chunks", required=True)
    p.add_argument("--provider", required=True, help="file:<path> or remote:<url>@<dim>")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("reduce", help="fit the 2-d reducer over precomputed vectors")
    p.add_argument("--chunks", required=True)
    p.add_argument("--vectors", required=True)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--neighbors", type=int, default=10)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_reduce)

    p = sub.add_parser("index", help="build a searchable index for one encoding")
    p.add_argument("--encoding", choices=["tfidf", "pvec", "bert_umap"], required=True)
    p.add_argument("--chunks", required=True)
    p.add_argument("--model", required=True, help="tfidf json / pvec npz / reducer npz")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("query", help="retrieve passages for a query")
    p.add_argument("query", nargs="?")
    p.add_argument("--index", required=True)
    p.add_argument("--chunks", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--provider", help="query encoder provider for reduced indexes")
    p.add_argument("--mode", choices=["raw", "augmented"], default="raw")
    p.add_argument("--augmenter", help="stub:<rules.json> or remote:<url>")
    p.add_argument("--template")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--infer-epochs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--generate", action="store_true", help="also print a stub-generated answer")
    p.add_argument("--repl", action="store_true", help="read queries line by line from stdin")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("run", help="execute a full experiment spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("eval", help="aggregate judgments into the score table")
    p.add_argument("--judgments", required=True)
    p.add_argument("--run")
    p.add_argument("--out-csv")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="run scaling benchmarks and fit exponents")
    p.add_argument("--methods", default="tfidf_retrieval")
    p.add_argument("--sizes", default="1000,2000,4000,8000")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bench)

    for sp in sub.choices.values():
        sp.add_argument("--json", action="store_true", help="machine-readable output")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("AUGRAG_LOG", "WARNING").upper())
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad usage; the contract reserves 2 for internal errors
        return 0 if e.code == 0 else 1
    try:
        args.func(args)
        return 0
    except (CliError, OSError, ValueError, KeyError, TypeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # internal error
        logger.exception("internal error")
        print(f"internal error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
