"""Operation-count predictions per retrieval method and a scaling micro-benchmark.

Predicted unit-op counts (proportionality constants fixed at 1, so they
compare methods ordinally, never absolutely):

    tfidf         n * m
    pvec          n * d * e_epochs  +  n * n * d
    bert_reduced  n * e_encode      +  n * d^2
    bert_full     n * l * h * h'    +  n * n * h'

The benchmark harness times retrieval-style workloads on deterministic
synthetic corpora over a ladder of sizes and fits the log-log slope, so
scaling trends (linear vs quadratic) can be checked against predictions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .corpus import Chunk
from . import tfidf as tfidf_mod
from . import retrieval

METHODS = ("tfidf", "pvec", "bert_reduced", "bert_full")
SCENARIOS = (
    "tfidf_fit",
    "tfidf_retrieval",
    "dense_pairwise",
    "dense_query_full",
    "dense_query_reduced",
    "dense_encode",
)


@dataclass(frozen=True)
class CostParams:
    n: int = 1000  # chunk count
    m: int = 50  # avg unique terms per chunk
    d: int = 64  # vector / reduced dimensionality
    e_epochs: int = 400  # paragraph-vector training epochs
    e_encode: int = 1  # per-document dense-encoding unit cost
    l: int = 512  # max sequence length
    h: int = 12  # attention heads
    h_prime: int = 768  # hidden size

    def __post_init__(self) -> None:
        for name in ("n", "m", "d", "e_epochs", "e_encode", "l", "h", "h_prime"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def predict_cost(method: str, p: CostParams) -> int:
    if method == "tfidf":
        return p.n * p.m
    if method == "pvec":
        return p.n * p.d * p.e_epochs + p.n * p.n * p.d
    if method == "bert_reduced":
        return p.n * p.e_encode + p.n * p.d**2
    if method == "bert_full":
        return p.n * p.l * p.h * p.h_prime + p.n * p.n * p.h_prime
    raise ValueError(f"unknown method: {method!r}")


@dataclass
class BenchReport:
    method: str
    sizes: list[int]
    timings: list[float]  # median seconds per size
    fitted_exponent: float
    r_squared: float

    def to_csv(self) -> str:
        lines = ["method,n,seconds"]
        for n, t in zip(self.sizes, self.timings):
            lines.append(f"{self.method},{n},{t:.9f}")
        return "\n".join(lines) + "\n"

    def to_gnuplot(self) -> str:
        lines = [
            f"# augrag bench: method={self.method} "
            f"exponent={self.fitted_exponent:.4f} r2={self.r_squared:.4f}",
            "# n seconds",
        ]
        for n, t in zip(self.sizes, self.timings):
            lines.append(f"{n} {t:.9f}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class BenchConfig:
    n_queries: int = 30
    words_per_chunk: int = 50
    vocab_size: int = 2000
    d_full: int = 768
    d_reduced: int = 2
    d_pairwise: int = 128
    k: int = 10
    l: int = 48
    h: int = 4
    h_prime: int = 160
    seed: int = 0


def synthetic_chunks(n: int, cfg: BenchConfig) -> list[Chunk]:
    """Deterministic random-word chunks: same (n, seed) always yields the same corpus."""
    rng = np.random.default_rng(cfg.seed + n)
    words = [f"w{i}" for i in range(cfg.vocab_size)]
    chunks = []
    for cid in range(n):
        picks = rng.integers(0, cfg.vocab_size, size=cfg.words_per_chunk)
        chunks.append(
            Chunk(chunk_id=cid, doc_id="bench", seq=cid, text=" ".join(words[w] for w in picks))
        )
    return chunks


def _synthetic_queries(cfg: BenchConfig, rng: np.random.Generator) -> list[str]:
    words = [f"w{i}" for i in range(cfg.vocab_size)]
    return [
        " ".join(words[w] for w in rng.integers(0, cfg.vocab_size, size=8))
        for _ in range(cfg.n_queries)
    ]


def _fit_loglog(sizes: list[int], timings: list[float]) -> tuple[float, float]:
    x = np.log(np.asarray(sizes, dtype=np.float64))
    y = np.log(np.asarray(timings, dtype=np.float64))
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def _timed(body, trials: int, min_sample: float = 0.01) -> float:
    """Median seconds per call; short bodies are repeated until a sample spans min_sample."""
    # warm up thread pools / caches until two consecutive calls are measured,
    # then size repetitions off the faster of them
    estimates = []
    for _ in range(3):
        start = time.perf_counter()
        body()
        estimates.append(time.perf_counter() - start)
        if sum(estimates) >= 5 * min_sample and len(estimates) >= 2:
            break
    estimate = min(estimates)
    reps = int(min(50, max(1, np.ceil(min_sample / max(estimate, 1e-9)))))
    times = []
    for _ in range(trials):
        start = time.perf_counter()
        for _ in range(reps):
            body()
        times.append((time.perf_counter() - start) / reps)
    return float(np.median(times))


def _scenario_body(scenario: str, n: int, cfg: BenchConfig):
    """Return (setup_artifacts, timed_callable) for one scenario at one size."""
    rng = np.random.default_rng(cfg.seed + 7 * n)
    if scenario in ("tfidf_fit", "tfidf_retrieval"):
        chunks = synthetic_chunks(n, cfg)
        if scenario == "tfidf_fit":
            return lambda: tfidf_mod.fit(chunks)
        model = tfidf_mod.fit(chunks)
        index = retrieval.build_index(
            [(c.chunk_id, tfidf_mod.transform(model, c.text)) for c in chunks], "tfidf"
        )
        queries = [tfidf_mod.transform(model, q) for q in _synthetic_queries(cfg, rng)]

        def run_queries():
            for q in queries:
                retrieval.top_k(index, q, cfg.k)

        return run_queries
    if scenario == "dense_pairwise":
        x = rng.standard_normal((n, cfg.d_pairwise))

        def pairwise():
            # streamed in row blocks: full n^2 * d scoring work without an
            # n^2 output allocation distorting the timing
            xn = x / np.linalg.norm(x, axis=1, keepdims=True)
            total = 0.0
            for start in range(0, n, 1024):
                total += float((xn[start : start + 1024] @ xn.T).sum())
            return total

        return pairwise
    if scenario in ("dense_query_full", "dense_query_reduced"):
        d = cfg.d_full if scenario == "dense_query_full" else cfg.d_reduced
        metric = "cosine" if scenario == "dense_query_full" else "euclidean"
        encoding = "dense_full" if scenario == "dense_query_full" else "dense_reduced"
        x = rng.standard_normal((n, d))
        index = retrieval.build_index(
            [(i, x[i]) for i in range(n)], encoding, metric=metric
        )
        queries = rng.standard_normal((cfg.n_queries, d))

        def run_dense():
            for q in queries:
                retrieval.top_k(index, q, cfg.k)

        return run_dense
    if scenario == "dense_encode":
        # simulated per-document transformer encoding: token matrix projections
        # costing l*h'^2 + l*h'*h flops per text
        w1 = rng.standard_normal((cfg.h_prime, cfg.h_prime))
        w2 = rng.standard_normal((cfg.h_prime, cfg.h))
        docs = rng.standard_normal((n, cfg.l, cfg.h_prime))

        def encode():
            total = 0.0
            for doc in docs:
                total += float(((doc @ w1) @ w2).sum())
            return total

        return encode
    raise ValueError(f"unknown benchmark scenario: {scenario!r}")


def run_benchmark(
    scenario: str,
    sizes: list[int],
    cfg: BenchConfig = BenchConfig(),
    trials: int = 3,
) -> BenchReport:
    """Median-of-trials wall time per size plus the fitted log-log exponent."""
    if len(sizes) < 3:
        raise ValueError("need at least 3 sizes to fit a scaling exponent")
    if sorted(sizes) != list(sizes) or len(set(sizes)) != len(sizes):
        raise ValueError("sizes must be strictly increasing")
    timings = []
    for n in sizes:
        body = _scenario_body(scenario, n, cfg)
        timings.append(_timed(body, trials))
    exponent, r2 = _fit_loglog(sizes, timings)
    return BenchReport(
        method=scenario, sizes=list(sizes), timings=timings,
        fitted_exponent=exponent, r_squared=r2,
    )
