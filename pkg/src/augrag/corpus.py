"""Document loading, sentence chunking, and context-window expansion.

Documents are split into sentence chunks at terminator-then-whitespace
boundaries; only sentences strictly longer than a configurable minimum
character count (default 15) are retained as retrieval units. A retrieved
chunk expands into a passage made of the chunk plus its immediate
predecessor and successor within the same document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class CorpusError(ValueError):
    """Raised for unreadable, malformed, or empty corpus inputs."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise CorpusError(f"document {self.doc_id!r} has empty text")


@dataclass(frozen=True)
class ChunkConfig:
    min_chars: int = 15
    sentence_terminators: frozenset[str] = frozenset({".", "!", "?"})

    def __post_init__(self) -> None:
        if self.min_chars < 0:
            raise CorpusError("min_chars must be >= 0")


@dataclass(frozen=True)
class Chunk:
    chunk_id: int
    doc_id: str
    seq: int
    text: str


@dataclass
class ContextPassage:
    """A retrieved chunk merged with its in-document neighbours."""

    center_chunk_id: int
    member_chunk_ids: list[int]
    text: str
    score: float = 0.0


def load_documents(path: str | Path, format: str = "plain") -> list[Document]:
    """Load documents from a directory of .txt files, a single .txt file, or a .jsonl file.

    Plain format reads files in lexicographic filename order, one Document per
    file (doc_id and title are the filename stem). Jsonl format reads one
    Document per line from ``doc_id``/``title``/``text`` keys.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus path does not exist: {path}")
    if format == "plain":
        if path.is_dir():
            files = sorted(p for p in path.iterdir() if p.suffix == ".txt")
        else:
            files = [path]
        docs = []
        for f in files:
            try:
                text = f.read_text(encoding="utf-8")
            except OSError as e:
                raise CorpusError(f"cannot read {f}: {e}") from e
            docs.append(Document(doc_id=f.stem, title=f.stem, text=text))
    elif format == "jsonl":
        docs = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as e:
                    raise CorpusError(f"{path}: malformed json on line {lineno}: {e}") from e
                for key in ("doc_id", "title", "text"):
                    if key not in rec:
                        raise CorpusError(f"{path}: line {lineno} missing {key!r}")
                docs.append(Document(doc_id=rec["doc_id"], title=rec["title"], text=rec["text"]))
    else:
        raise CorpusError(f"unknown corpus format: {format!r}")
    if not docs:
        raise CorpusError(f"empty corpus: {path}")
    seen: set[str] = set()
    for d in docs:
        if d.doc_id in seen:
            raise CorpusError(f"duplicate doc_id {d.doc_id!r}")
        seen.add(d.doc_id)
    return docs


def split_sentences(text: str, cfg: ChunkConfig = ChunkConfig()) -> list[str]:
    """Split at terminator characters followed by whitespace or end of text.

    The terminator stays with its sentence. Pieces are whitespace-trimmed;
    empty pieces are dropped (no length filter here).
    """
    pieces: list[str] = []
    start = 0
    n = len(text)
    for i, ch in enumerate(text):
        if ch in cfg.sentence_terminators and (i + 1 == n or text[i + 1].isspace()):
            piece = text[start : i + 1].strip()
            if piece:
                pieces.append(piece)
            start = i + 1
    tail = text[start:].strip()
    if tail:
        pieces.append(tail)
    return pieces


def build_chunks(doc: Document, cfg: ChunkConfig = ChunkConfig(), start_id: int = 0) -> list[Chunk]:
    """Sentence-chunk one document, keeping sentences strictly longer than min_chars.

    ``seq`` numbers retained chunks only, so the ±1 context window skips
    filtered short sentences. ``chunk_id`` counts from ``start_id``.
    """
    if not doc.text.strip():
        raise CorpusError(f"document {doc.doc_id!r} has empty text")
    chunks = []
    seq = 0
    for sentence in split_sentences(doc.text, cfg):
        if len(sentence) > cfg.min_chars:
            chunks.append(Chunk(chunk_id=start_id + seq, doc_id=doc.doc_id, seq=seq, text=sentence))
            seq += 1
    return chunks


def chunk_corpus(docs: list[Document], cfg: ChunkConfig = ChunkConfig()) -> list[Chunk]:
    """Chunk every document, assigning corpus-wide chunk ids in (doc, seq) order."""
    chunks: list[Chunk] = []
    for doc in docs:
        chunks.extend(build_chunks(doc, cfg, start_id=len(chunks)))
    return chunks


def expand_window(chunks: list[Chunk], center: int, score: float = 0.0) -> ContextPassage:
    """Expand a chunk id into the passage of its (n-1, n, n+1) in-document neighbours."""
    by_id = {c.chunk_id: c for c in chunks}
    if center not in by_id:
        raise KeyError(f"unknown chunk_id {center}")
    center_chunk = by_id[center]
    members = []
    for cid in (center - 1, center, center + 1):
        c = by_id.get(cid)
        if c is not None and c.doc_id == center_chunk.doc_id:
            members.append(c)
    members.sort(key=lambda c: c.chunk_id)
    return ContextPassage(
        center_chunk_id=center,
        member_chunk_ids=[c.chunk_id for c in members],
        text=" ".join(c.text for c in members),
        score=score,
    )


def dump_chunks(chunks: list[Chunk], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in chunks:
            fh.write(
                json.dumps(
                    {"chunk_id": c.chunk_id, "doc_id": c.doc_id, "seq": c.seq, "text": c.text},
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def load_chunks(path: str | Path) -> list[Chunk]:
    chunks = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                chunks.append(
                    Chunk(
                        chunk_id=int(rec["chunk_id"]),
                        doc_id=rec["doc_id"],
                        seq=int(rec["seq"]),
                        text=rec["text"],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise CorpusError(f"{path}: bad chunk record on line {lineno}: {e}") from e
    return chunks
