"""Answer scoring rubric (1-4), per-system aggregation, and automated proxy checks.

The rubric is a decision tree over four human judgments:
unrelated -> 1; related but wrong -> 2; correct but ignoring context or
breaking constraints -> 3; correct, grounded, and compliant -> 4.
Aggregation produces the 3x3 regime-by-retriever mean table, with the
no-RAG regime collapsed into a single retriever-independent cell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .generate import Answer, MODES, RETRIEVERS
from .tokenizer import TokenizerConfig, tokenize


@dataclass(frozen=True)
class Judgment:
    related: bool
    correct: bool
    uses_context: bool
    respects_constraints: bool
    judge_id: str = ""


def score_answer(j: Judgment) -> int:
    """Map one judgment through the decision tree to a 1-4 score."""
    if not j.related:
        return 1
    if not j.correct:
        return 2
    if j.uses_context and j.respects_constraints:
        return 4
    return 3


@dataclass
class EvalRecord:
    query_id: str
    mode: str  # no_rag | rag_raw | rag_augmented
    retriever: str  # tfidf | pvec | bert_umap | none
    judgment: Judgment
    answer: Answer | None = None
    score: int = 0

    def __post_init__(self) -> None:
        derived = score_answer(self.judgment)
        if self.score == 0:
            self.score = derived
        elif self.score != derived:
            raise ValueError(f"score {self.score} does not match judgment (expect {derived})")

    @property
    def cell(self) -> tuple[str, str]:
        # no_rag collapses the retriever axis into one shared cell
        if self.mode == "no_rag":
            return ("no_rag", "none")
        return (self.mode, self.retriever)


@dataclass
class ScoreTable:
    """Mean scores per (regime, retriever) cell; missing cells are absent, not zero."""

    cells: dict[tuple[str, str], float]
    counts: dict[tuple[str, str], int]

    def mean(self, mode: str, retriever: str = "none") -> float | None:
        if mode == "no_rag":
            return self.cells.get(("no_rag", "none"))
        return self.cells.get((mode, retriever))

    def to_csv(self) -> str:
        """Regime-by-retriever CSV; the shared no-RAG mean repeats per column."""
        lines = ["regime," + ",".join(RETRIEVERS)]
        for mode in MODES:
            row = [mode]
            for retriever in RETRIEVERS:
                value = self.mean(mode, retriever)
                row.append("" if value is None else f"{value:.6g}")
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def render(self) -> str:
        """Aligned-text table in the 3x3 layout; the no-RAG value spans the row."""
        width = 22
        header = " " * 28 + "".join(r.center(width) for r in RETRIEVERS)
        lines = [header]
        labels = {
            "no_rag": "no RAG",
            "rag_raw": "RAG, raw query",
            "rag_augmented": "RAG, augmented query",
        }
        for mode in MODES:
            label = labels[mode].ljust(28)
            if mode == "no_rag":
                value = self.mean("no_rag")
                cell = "-" if value is None else f"{value:.6g}"
                lines.append(label + cell.center(width * len(RETRIEVERS)))
                continue
            row = []
            for retriever in RETRIEVERS:
                value = self.mean(mode, retriever)
                row.append(("-" if value is None else f"{value:.6g}").center(width))
            lines.append(label + "".join(row))
        return "\n".join(lines)


def aggregate(records: list[EvalRecord]) -> ScoreTable:
    """Arithmetic mean per cell over the records assigned to it."""
    sums: dict[tuple[str, str], float] = {}
    counts: dict[tuple[str, str], int] = {}
    for r in records:
        if not (1 <= r.score <= 4):
            raise ValueError(f"record {r.query_id!r} has invalid score {r.score}")
        sums[r.cell] = sums.get(r.cell, 0.0) + r.score
        counts[r.cell] = counts.get(r.cell, 0) + 1
    cells = {cell: sums[cell] / counts[cell] for cell in sums}
    return ScoreTable(cells=cells, counts=counts)


def constraint_check(answer: Answer, max_words: int) -> bool:
    """True iff the whitespace-token count is <= max_words (inclusive bound)."""
    return len(answer.text.split()) <= max_words


def grounding_overlap(
    answer: Answer, tokenizer: TokenizerConfig = TokenizerConfig()
) -> float | None:
    """Fraction of the answer's distinct tokens found in its passages.

    None when the answer carries no passages; 1.0 for an answer with no
    tokens at all (vacuously grounded).
    """
    if not answer.passages_used:
        return None
    answer_tokens = set(tokenize(answer.text, tokenizer))
    if not answer_tokens:
        return 1.0
    passage_tokens: set[str] = set()
    for p in answer.passages_used:
        passage_tokens.update(tokenize(p.text, tokenizer))
    return len(answer_tokens & passage_tokens) / len(answer_tokens)


def load_judgments(path: str | Path) -> list[tuple[str, str, str, Judgment]]:
    """Read a judgment file: jsonl of query_id, system {mode, retriever}, four booleans, judge_id."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                system = rec["system"]
                judgment = Judgment(
                    related=bool(rec["related"]),
                    correct=bool(rec["correct"]),
                    uses_context=bool(rec["uses_context"]),
                    respects_constraints=bool(rec["respects_constraints"]),
                    judge_id=rec.get("judge_id", ""),
                )
                out.append((rec["query_id"], system["mode"], system["retriever"], judgment))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise ValueError(f"{path}: bad judgment on line {lineno}: {e}") from e
    return out


def records_from_files(
    judgments_path: str | Path, run_path: str | Path | None = None
) -> list[EvalRecord]:
    """Join judgments with run-file answers on (query_id, mode, retriever)."""
    answers: dict[tuple[str, str, str], Answer] = {}
    if run_path is not None:
        with open(run_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                if rec.get("error"):
                    continue
                key = (rec["query_id"], rec["mode"], rec["retriever"])
                answers[key] = Answer.from_dict(rec)
    records = []
    for query_id, mode, retriever, judgment in load_judgments(judgments_path):
        records.append(
            EvalRecord(
                query_id=query_id,
                mode=mode,
                retriever=retriever,
                judgment=judgment,
                answer=answers.get((query_id, mode, retriever)),
            )
        )
    return records
