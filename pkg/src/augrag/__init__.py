"""Query-augmented retrieval-augmented-generation engine.

Chunk a corpus into sentences, index the chunks under sparse (TF-IDF),
trained paragraph-vector, and reduced dense encodings, rewrite queries into
answer-shaped pseudo-documents through a language-model client, retrieve
context windows, generate constrained grounded answers, and score runs with
a 1-4 rubric. A cost module predicts per-method operation counts and
benchmarks scaling trends.
"""

from . import augment, corpus, cost, embed, evaluate, generate, pipeline, pvec, reduce, retrieval, tfidf, tokenizer

__all__ = [
    "augment",
    "corpus",
    "cost",
    "embed",
    "evaluate",
    "generate",
    "pipeline",
    "pvec",
    "reduce",
    "retrieval",
    "tfidf",
    "tokenizer",
]

__version__ = "0.1.0"
