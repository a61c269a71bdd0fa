"""Nonlinear reduction of dense embeddings to a low-dimensional space.

UMAP-style construction: an exact k-nearest-neighbour graph becomes a fuzzy
weighted graph (per-point bandwidths solved so each point's membership mass
is log2(k)), and a force-directed layout optimizes low-dimensional
coordinates under the kernel 1 / (1 + r^2). Out-of-sample queries are placed
by weighted averaging over their nearest training points, which keeps
per-query cost linear and fully deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


SMOOTH_TOLERANCE = 1e-5
SIGMA_MIN = 1e-8
SIGMA_MAX = 1e8
GRAD_CLIP = 4.0


@dataclass(frozen=True)
class ReducerConfig:
    out_dim: int = 2
    n_neighbors: int = 10
    layout_epochs: int = 200
    learning_rate: float = 1.0
    negative_rate: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.out_dim < 1:
            raise ValueError("out_dim must be >= 1")
        if self.n_neighbors < 2:
            raise ValueError("n_neighbors must be >= 2")
        if self.layout_epochs < 1:
            raise ValueError("layout_epochs must be >= 1")
        if self.negative_rate < 1:
            raise ValueError("negative_rate must be >= 1")

    def to_dict(self) -> dict:
        return {
            "out_dim": self.out_dim,
            "n_neighbors": self.n_neighbors,
            "layout_epochs": self.layout_epochs,
            "learning_rate": self.learning_rate,
            "negative_rate": self.negative_rate,
            "seed": self.seed,
        }


@dataclass
class NeighborGraph:
    indices: np.ndarray  # (N, k) neighbour ids, ascending distance, ties by lower id
    dists: np.ndarray  # (N, k) Euclidean distances


@dataclass
class WeightedGraph:
    graph: NeighborGraph
    rho: np.ndarray  # (N,) distance to nearest neighbour
    sigma: np.ndarray  # (N,) solved bandwidth
    directed: np.ndarray  # (N, k) directed membership weights
    heads: np.ndarray  # (E,) symmetrized directed edge heads
    tails: np.ndarray  # (E,) edge tails
    weights: np.ndarray  # (E,) symmetrized weights


@dataclass
class Reducer:
    training_vectors: np.ndarray  # N x D
    embedding: np.ndarray  # N x out_dim
    graph: NeighborGraph
    rho: np.ndarray
    sigma: np.ndarray
    config: ReducerConfig


def knn_graph(vectors: np.ndarray, k: int) -> NeighborGraph:
    """Exact k nearest neighbours per point by Euclidean distance, self excluded.

    Ties break toward the lower point id.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    n = vectors.shape[0]
    if n <= k:
        raise ValueError(f"need more points than neighbours: n={n}, k={k}")
    sq = np.sum(vectors**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (vectors @ vectors.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    dists = np.sqrt(np.take_along_axis(d2, order, axis=1))
    return NeighborGraph(indices=order.astype(np.int64), dists=dists)


def solve_sigma(dists_row: np.ndarray, rho_i: float, target: float) -> float:
    """Binary-search the bandwidth so sum_j exp(-max(0, d_ij - rho_i) / sigma) = target."""
    lo, hi, mid = 0.0, np.inf, 1.0
    shifted = np.maximum(dists_row - rho_i, 0.0)
    for _ in range(64):
        psum = float(np.exp(-shifted / mid).sum())
        if abs(psum - target) < SMOOTH_TOLERANCE:
            break
        if psum > target:
            hi = mid
            mid = (lo + hi) / 2.0
        else:
            lo = mid
            mid = mid * 2.0 if hi == np.inf else (lo + hi) / 2.0
    return float(min(max(mid, SIGMA_MIN), SIGMA_MAX))


def fuzzy_weights(graph: NeighborGraph) -> WeightedGraph:
    """Fuzzy membership weights with probabilistic-union symmetrization."""
    n, k = graph.dists.shape
    target = float(np.log2(k))
    rho = graph.dists[:, 0].copy()
    sigma = np.array([solve_sigma(graph.dists[i], rho[i], target) for i in range(n)])
    directed = np.exp(-np.maximum(graph.dists - rho[:, None], 0.0) / sigma[:, None])

    entries: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j_idx in range(k):
            entries[(i, int(graph.indices[i, j_idx]))] = float(directed[i, j_idx])
    sym: dict[tuple[int, int], float] = {}
    for (i, j), w_ij in entries.items():
        if (j, i) in sym:
            continue
        w_ji = entries.get((j, i), 0.0)
        sym[(i, j)] = w_ij + w_ji - w_ij * w_ji
    heads = np.empty(2 * len(sym), dtype=np.int64)
    tails = np.empty(2 * len(sym), dtype=np.int64)
    weights = np.empty(2 * len(sym), dtype=np.float64)
    for e, ((i, j), w) in enumerate(sorted(sym.items())):
        heads[2 * e], tails[2 * e], weights[2 * e] = i, j, w
        heads[2 * e + 1], tails[2 * e + 1], weights[2 * e + 1] = j, i, w
    return WeightedGraph(
        graph=graph, rho=rho, sigma=sigma, directed=directed,
        heads=heads, tails=tails, weights=weights,
    )


@njit(cache=False)
def _layout_epoch(
    embedding: np.ndarray,
    heads: np.ndarray,
    tails: np.ndarray,
    neg_targets: np.ndarray,
    lr: float,
) -> None:
    """One epoch of sequential SGD: attract sampled edges, repel sampled non-edges."""
    dim = embedding.shape[1]
    for s in range(heads.shape[0]):
        i = heads[s]
        j = tails[s]
        r2 = 0.0
        for d in range(dim):
            diff = embedding[i, d] - embedding[j, d]
            r2 += diff * diff
        coeff = -2.0 / (1.0 + r2)
        for d in range(dim):
            g = coeff * (embedding[i, d] - embedding[j, d])
            if g > GRAD_CLIP:
                g = GRAD_CLIP
            elif g < -GRAD_CLIP:
                g = -GRAD_CLIP
            embedding[i, d] += g * lr
            embedding[j, d] -= g * lr
        for t_idx in range(neg_targets.shape[1]):
            t = neg_targets[s, t_idx]
            if t == i:
                continue
            r2 = 0.0
            for d in range(dim):
                diff = embedding[i, d] - embedding[t, d]
                r2 += diff * diff
            coeff = 2.0 / ((0.001 + r2) * (1.0 + r2))
            for d in range(dim):
                g = coeff * (embedding[i, d] - embedding[t, d])
                if g > GRAD_CLIP:
                    g = GRAD_CLIP
                elif g < -GRAD_CLIP:
                    g = -GRAD_CLIP
                embedding[i, d] += g * lr


def fit_layout(weighted: WeightedGraph, cfg: ReducerConfig, vectors: np.ndarray) -> Reducer:
    """Optimize low-dimensional coordinates over the weighted graph."""
    vectors = np.asarray(vectors, dtype=np.float64)
    n = weighted.rho.shape[0]
    rng = np.random.default_rng(cfg.seed)
    embedding = rng.standard_normal((n, cfg.out_dim)) * 1e-2

    probabilities = weighted.weights / weighted.weights.sum()
    samples_per_epoch = len(weighted.heads)
    for epoch in range(cfg.layout_epochs):
        lr = cfg.learning_rate * (1.0 - epoch / cfg.layout_epochs)
        picks = rng.choice(len(weighted.heads), size=samples_per_epoch, p=probabilities)
        neg_targets = rng.integers(0, n, size=(samples_per_epoch, cfg.negative_rate))
        _layout_epoch(
            embedding, weighted.heads[picks], weighted.tails[picks], neg_targets, lr
        )
    return Reducer(
        training_vectors=vectors,
        embedding=embedding,
        graph=weighted.graph,
        rho=weighted.rho,
        sigma=weighted.sigma,
        config=cfg,
    )


def fit(vectors: np.ndarray, cfg: ReducerConfig = ReducerConfig()) -> Reducer:
    """knn graph -> fuzzy weights -> layout, in one call."""
    graph = knn_graph(vectors, cfg.n_neighbors)
    return fit_layout(fuzzy_weights(graph), cfg, vectors)


def transform(reducer: Reducer, v: np.ndarray) -> np.ndarray:
    """Place an unseen vector: fuzzy-weighted average of its nearest training points.

    Exact matches (distance 0) take all the weight, so transforming a
    training vector reproduces its coordinates.
    """
    v = np.asarray(v, dtype=np.float64)
    dim = reducer.training_vectors.shape[1]
    if v.shape != (dim,):
        raise ValueError(f"dimension mismatch: got {v.shape}, training dim is {dim}")
    k = reducer.config.n_neighbors
    dists = np.sqrt(np.maximum(np.sum((reducer.training_vectors - v) ** 2, axis=1), 0.0))
    order = np.argsort(dists, kind="stable")[:k]
    nn_dists = dists[order]
    if nn_dists[0] == 0.0:
        zero = order[nn_dists == 0.0]
        return reducer.embedding[zero].mean(axis=0)
    rho_v = float(nn_dists[0])
    sigma_v = solve_sigma(nn_dists, rho_v, float(np.log2(k)))
    w = np.exp(-np.maximum(nn_dists - rho_v, 0.0) / sigma_v)
    w /= w.sum()
    return w @ reducer.embedding[order]


REDUCER_FORMAT = "augrag.reducer/1"


def save_reducer(reducer: Reducer, path: str | Path) -> None:
    meta = {"format": REDUCER_FORMAT, "config": reducer.config.to_dict()}
    np.savez(
        path,
        meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
        training_vectors=reducer.training_vectors,
        embedding=reducer.embedding,
        knn_indices=reducer.graph.indices,
        knn_dists=reducer.graph.dists,
        rho=reducer.rho,
        sigma=reducer.sigma,
    )


def load_reducer(path: str | Path) -> Reducer:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("format") != REDUCER_FORMAT:
            raise ValueError(f"unsupported reducer format: {meta.get('format')!r}")
        return Reducer(
            training_vectors=data["training_vectors"],
            embedding=data["embedding"],
            graph=NeighborGraph(indices=data["knn_indices"], dists=data["knn_dists"]),
            rho=data["rho"],
            sigma=data["sigma"],
            config=ReducerConfig(**meta["config"]),
        )
