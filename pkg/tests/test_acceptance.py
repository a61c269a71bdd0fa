"""Acceptance suite: one test per release criterion, at pinned tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion. Each test enforces its stated tolerance and time budget.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from augrag import pvec as pvec_mod
from augrag import reduce as reduce_mod
from augrag import tfidf as tfidf_mod
from augrag.augment import IDENTITY_TEMPLATE, StubLlmClient
from augrag.corpus import Chunk
from augrag.cost import run_benchmark
from augrag.evaluate import EvalRecord, Judgment, aggregate, score_answer
from augrag.retrieval import RetrievalConfig, RetrievalPipeline, build_index, retrieve, top_k
from augrag.tfidf import cosine
from augrag.tokenizer import tokenize

from test_pipeline import base_spec  # reuses the hermetic run-spec builder
from augrag.pipeline import run as run_pipeline


def _report(name: str, elapsed: float | None = None) -> None:
    suffix = f" ({elapsed:.2f}s)" if elapsed is not None else ""
    print(f"ACCEPTANCE PASS: {name}{suffix}")


class TestTfIdfOracleEquivalence:
    def test_fit_transform_matches_direct_formula(self):
        start = time.perf_counter()
        rng = np.random.default_rng(2024)
        words = [f"term{i}" for i in range(60)]
        texts = [
            " ".join(rng.choice(words, size=int(rng.integers(4, 12)))) for _ in range(20)
        ]
        chunks = [Chunk(i, "d", i, t) for i, t in enumerate(texts)]
        model = tfidf_mod.fit(chunks)
        id_to_term = model.vocab.id_to_term

        # independent direct-formula oracle
        n = len(texts)
        token_lists = [tokenize(t) for t in texts]
        df = {}
        for toks in token_lists:
            for w in set(toks):
                df[w] = df.get(w, 0) + 1
        idf = {w: math.log((1 + n) / (1 + df[w])) + 1 for w in df}
        for text in texts:
            weights = {}
            for w in tokenize(text):
                if w in idf:
                    weights[w] = weights.get(w, 0.0) + idf[w]
            norm = math.sqrt(sum(x * x for x in weights.values()))
            expected = {w: x / norm for w, x in weights.items()}
            got = {id_to_term[tid]: x for tid, x in tfidf_mod.transform(model, text).items()}
            assert set(got) == set(expected)
            for w in expected:
                assert abs(got[w] - expected[w]) < 1e-9
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0
        _report("tfidf fit+transform matches direct-formula oracle within 1e-9", elapsed)


class TestRetrievalBruteForceEquivalence:
    def test_top_k_matches_exhaustive_sort(self):
        start = time.perf_counter()
        rng = np.random.default_rng(11)
        vectors = rng.standard_normal((500, 32))
        # plant exact duplicates so tie-breaking is exercised
        vectors[100] = vectors[7]
        vectors[250] = vectors[7]
        index = build_index([(i, vectors[i]) for i in range(500)], "dense_full")
        for q_idx in range(50):
            q = rng.standard_normal(32) if q_idx else vectors[7].copy()
            expected = sorted(
                ((i, cosine(vectors[i], q)) for i in range(500)),
                key=lambda pair: (-pair[1], pair[0]),
            )[:10]
            got = top_k(index, q, k=10).hits
            assert [i for i, _ in got] == [i for i, _ in expected]
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0
        _report("top_k identical to exhaustive-sort oracle incl. tie-breaks", elapsed)


class TestParagraphVectorGradients:
    def test_analytic_vs_central_differences(self):
        from test_pvec import random_model

        rng = np.random.default_rng(314)
        h = 1e-4
        for _ in range(10):
            model = random_model(rng)
            doc = int(rng.integers(0, 4))
            word = int(rng.integers(0, 9))
            negs = [int(x) for x in rng.integers(0, 9, size=4)]
            loss, grad_doc, grad_word, grad_negs = pvec_mod.pair_loss_and_grad(
                model, doc, word, negs
            )
            fd = np.zeros_like(grad_doc)
            for i in range(len(fd)):
                up = model.doc_vectors.copy()
                down = model.doc_vectors.copy()
                up[doc, i] += h
                down[doc, i] -= h
                m_up = pvec_mod.PvModel(**{**model.__dict__, "doc_vectors": up})
                m_down = pvec_mod.PvModel(**{**model.__dict__, "doc_vectors": down})
                fd[i] = (
                    pvec_mod.pair_loss_and_grad(m_up, doc, word, negs)[0]
                    - pvec_mod.pair_loss_and_grad(m_down, doc, word, negs)[0]
                ) / (2 * h)
            rel = np.linalg.norm(grad_doc - fd) / max(np.linalg.norm(fd), 1e-12)
            assert rel < 1e-4
        _report("paragraph-vector analytic gradients match finite differences < 1e-4")


class TestParagraphVectorTopicRetrieval:
    def test_topic_rank_one(self):
        from test_pvec import toy_corpus

        start = time.perf_counter()
        chunks, labels = toy_corpus()
        model = pvec_mod.train(chunks, pvec_mod.PvConfig(dim=16, epochs=400, seed=7))
        hits = 0
        for i, chunk in enumerate(chunks):
            v = pvec_mod.infer_vector(model, chunk.text, infer_epochs=100, seed=1)
            sims = np.array([cosine(v, model.doc_vectors[j]) for j in range(len(chunks))])
            hits += labels[int(np.argmax(sims))] == labels[i]
        elapsed = time.perf_counter() - start
        assert hits >= 27, f"same-topic rank-1 hits {hits}/30"
        assert elapsed < 120
        _report(f"paragraph-vector topic retrieval {hits}/30 at rank 1", elapsed)


class TestReducerQuality:
    def test_three_gaussian_benchmark(self):
        start = time.perf_counter()
        rng = np.random.default_rng(3)
        dim = 16
        centers = np.zeros((3, dim))
        centers[1, 0] = 30.0
        centers[2, 1] = 30.0
        points = np.vstack([rng.standard_normal((50, dim)) + c for c in centers])
        labels = np.repeat(np.arange(3), 50)

        cfg = reduce_mod.ReducerConfig(seed=11)
        reducer = reduce_mod.fit(points, cfg)

        # sigma binary-search residual everywhere
        target = np.log2(cfg.n_neighbors)
        graph = reducer.graph
        for i in range(len(points)):
            total = np.exp(
                -np.maximum(graph.dists[i] - reducer.rho[i], 0.0) / reducer.sigma[i]
            ).sum()
            assert abs(total - target) < 1e-5

        emb = reducer.embedding
        d2 = ((emb[:, None, :] - emb[None, :, :]) ** 2).sum(-1)
        np.fill_diagonal(d2, np.inf)
        nn = np.argsort(d2, axis=1, kind="stable")[:, :10]
        purity = float((labels[nn] == labels[:, None]).mean())
        assert purity >= 0.80

        from sklearn.manifold import trustworthiness

        tw = float(trustworthiness(points, emb, n_neighbors=10))
        assert tw >= 0.80

        again = reduce_mod.fit(points, cfg)
        assert np.array_equal(reducer.embedding, again.embedding)

        elapsed = time.perf_counter() - start
        assert elapsed < 30
        _report(
            f"reducer quality: purity {purity:.3f}, trustworthiness {tw:.3f}, "
            "sigma residual < 1e-5, deterministic",
            elapsed,
        )


class TestEvaluationTree:
    def test_sixteen_combinations_and_aggregation(self):
        fields = ("related", "correct", "uses_context", "respects_constraints")
        seen = set()
        for combo in itertools.product([False, True], repeat=4):
            j = Judgment(**dict(zip(fields, combo)))
            score = score_answer(j)
            seen.add((combo, score))
            related, correct, uses, resp = combo
            if not related:
                assert score == 1
            elif not correct:
                assert score == 2
            elif uses and resp:
                assert score == 4
            else:
                assert score == 3
            # monotone: flipping any single False to True never lowers the score
            for i, value in enumerate(combo):
                if not value:
                    flipped = dict(zip(fields, combo))
                    flipped[fields[i]] = True
                    assert score_answer(Judgment(**flipped)) >= score
        assert len(seen) == 16

        # aggregation against hand-computed means
        def rec(mode, retriever, score4, qid):
            combos = {
                4: (True, True, True, True),
                3: (True, True, False, True),
                2: (True, False, False, False),
                1: (False, False, False, False),
            }
            return EvalRecord(
                query_id=qid, mode=mode, retriever=retriever,
                judgment=Judgment(*combos[score4]),
            )

        scores = [4, 4, 4, 4, 3, 4, 3, 4, 3, 3]
        records = [rec("rag_augmented", "tfidf", s, f"q{i}") for i, s in enumerate(scores)]
        records += [rec("rag_raw", "pvec", 3, "q0"), rec("rag_raw", "pvec", 4, "q1")]
        records += [rec("no_rag", "none", 3, "q0")]
        table = aggregate(records)
        assert abs(table.mean("rag_augmented", "tfidf") - 3.6) < 1e-12
        assert abs(table.mean("rag_raw", "pvec") - 3.5) < 1e-12
        assert abs(table.mean("no_rag") - 3.0) < 1e-12
        rendered = table.render()
        assert "tfidf" in rendered and "pvec" in rendered and "bert_umap" in rendered
        csv = table.to_csv()
        assert csv.splitlines()[0] == "regime,tfidf,pvec,bert_umap"
        _report("evaluation tree reproduces the 1-4 mapping; aggregation exact to 1e-12")


ANSWER_CHUNKS = [
    ("Aspirin lowers fever by blocking prostaglandin synthesis in the body.",
     "Which common tablet helps when your temperature climbs?"),
    ("Honey never spoils because its low moisture and acidity stop microbes.",
     "Name a pantry sweetener that stays edible forever."),
    ("The cheetah reaches seventy miles per hour in short sprints.",
     "What creature outpaces every other runner on land?"),
    ("Photosynthesis converts sunlight into chemical energy inside leaves.",
     "How can plants make daylight become usable power?"),
    ("Mount Everest rises about 8849 meters above sea level.",
     "How tall does Earth's highest summit stand?"),
    ("Octopuses have three hearts and blue copper-based blood.",
     "Which sea animal keeps several pumps beating at once?"),
    ("The Great Wall stretches thousands of kilometers across northern China.",
     "Describe humanity's longest fortification ever built."),
    ("Lightning heats the surrounding air to thirty thousand kelvin.",
     "How hot can a storm bolt turn nearby skies?"),
    ("Penicillin was discovered by Alexander Fleming in 1928.",
     "Who stumbled onto the first antibiotic, and when?"),
    ("Tectonic plates drift a few centimeters every year.",
     "How quickly do continents wander apart?"),
]

DISTRACTORS = [
    "Ravens solve puzzles that stump many young children.",
    "Glass flows so slowly that panes stay rigid for centuries.",
    "Bamboo grows nearly a meter in a single day.",
    "Sharks predate trees in the fossil record.",
    "Copper kills bacteria on contact within hours.",
    "Venus spins backward compared with the other planets.",
    "Mushrooms share nutrients through underground networks.",
    "Antarctica holds most of the planet's fresh water as ice.",
    "Some metals like gallium melt in a warm hand.",
    "Butterflies taste leaves through sensors in their feet.",
]


class TestCentralClaimAtDeskScale:
    def test_augmented_beats_raw_on_answer_phrased_corpus(self):
        start = time.perf_counter()
        texts = [a for a, _ in ANSWER_CHUNKS] + DISTRACTORS
        chunks = [Chunk(i, f"doc{i}", 0, t) for i, t in enumerate(texts)]
        assert len(chunks) == 20
        model = tfidf_mod.fit(chunks)

        # questions share no content tokens with their own answers
        for target_id, (answer, question) in enumerate(ANSWER_CHUNKS):
            overlap = set(tokenize(question)) & set(tokenize(answer))
            assert not overlap, f"question {target_id} leaks tokens {overlap}"

        rules = {q: f"A short note: {a}" for a, q in ANSWER_CHUNKS}
        stub = StubLlmClient(rules=rules, default="no idea at all")
        index = build_index(
            [(c.chunk_id, tfidf_mod.transform(model, c.text)) for c in chunks], "tfidf"
        )
        pipeline = RetrievalPipeline(
            chunks=chunks,
            index=index,
            encoder=lambda t: tfidf_mod.transform(model, t),
            augment_client=stub,
            augment_template=IDENTITY_TEMPLATE,
        )
        cfg = RetrievalConfig(k=3)
        augmented_top1 = 0
        raw_below_top1 = 0
        for target_id, (_, question) in enumerate(ANSWER_CHUNKS):
            aug = retrieve(pipeline, question, mode="augmented", cfg=cfg)
            augmented_top1 += aug.hits.hits[0][0] == target_id
            raw = retrieve(pipeline, question, mode="raw", cfg=cfg)
            raw_below_top1 += raw.hits.hits[0][0] != target_id
        elapsed = time.perf_counter() - start
        assert augmented_top1 >= 9, f"augmented top-1 {augmented_top1}/10"
        assert raw_below_top1 >= 5, f"raw below-top-1 {raw_below_top1}/10"
        assert elapsed < 5
        _report(
            f"augmented mode top-1 {augmented_top1}/10 vs raw below-top-1 "
            f"{raw_below_top1}/10 on answer-phrased corpus",
            elapsed,
        )


class TestScalingTrends:
    def test_exponents_and_reduced_speedup(self):
        start = time.perf_counter()
        tfidf_report = run_benchmark("tfidf_retrieval", [1000, 2000, 4000, 8000], trials=3)
        assert abs(tfidf_report.fitted_exponent - 1.0) <= 0.3, tfidf_report

        pairwise = run_benchmark("dense_pairwise", [500, 1000, 2000, 4000], trials=3)
        assert abs(pairwise.fitted_exponent - 2.0) <= 0.4, pairwise

        full = run_benchmark("dense_query_full", [2000, 4000, 8000], trials=3)
        reduced = run_benchmark("dense_query_reduced", [2000, 4000, 8000], trials=3)
        assert reduced.timings[-1] < full.timings[-1]

        elapsed = time.perf_counter() - start
        assert elapsed < 180
        _report(
            f"scaling: tfidf exponent {tfidf_report.fitted_exponent:.2f}, "
            f"pairwise {pairwise.fitted_exponent:.2f}, reduced query "
            f"{reduced.timings[-1] * 1e3:.1f}ms < full {full.timings[-1] * 1e3:.1f}ms at n=8k",
            elapsed,
        )


class TestEndToEndDeterminism:
    def test_byte_identical_run_files(self, tmp_path):
        out1 = tmp_path / "run1.jsonl"
        out2 = tmp_path / "run2.jsonl"
        run_pipeline(base_spec(tmp_path), out1, tmp_path / "trace1.jsonl")
        run_pipeline(base_spec(tmp_path), out2, tmp_path / "trace2.jsonl")
        assert out1.read_bytes() == out2.read_bytes()
        assert (tmp_path / "trace1.jsonl").read_bytes() == (tmp_path / "trace2.jsonl").read_bytes()
        records = [json.loads(line) for line in out1.read_text().splitlines()]
        assert len(records) == 70
        _report("end-to-end run files byte-identical across executions (70 records)")
