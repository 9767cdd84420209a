"""Document-structured corpora and their plain-text file format.

A corpus file is UTF-8 text with one sentence per line; an empty line closes
the current document.  Consecutive empty lines collapse, leading and trailing
empty lines are ignored, and a line that is whitespace-only but not empty is
a format error (it would yield an empty sentence after trimming).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AlignmentError, CorpusFormatError

Document = list[str]


def _check_sentence(sentence: str, where: str) -> None:
    if not isinstance(sentence, str):
        raise CorpusFormatError(f"{where}: sentence must be str, got {type(sentence).__name__}")
    if sentence.strip() == "":
        raise CorpusFormatError(f"{where}: empty sentence")
    if sentence != sentence.strip():
        raise CorpusFormatError(f"{where}: sentence has leading/trailing whitespace: {sentence!r}")
    if "\n" in sentence or "\r" in sentence:
        raise CorpusFormatError(f"{where}: sentence contains a newline: {sentence!r}")


@dataclass
class DocumentCorpus:
    """An ordered list of documents, each a non-empty list of sentences."""

    language: str
    docs: list[Document] = field(default_factory=list)

    def __post_init__(self) -> None:
        for d, doc in enumerate(self.docs):
            if not doc:
                raise CorpusFormatError(f"doc {d}: document with zero sentences")
            for s, sentence in enumerate(doc):
                _check_sentence(sentence, f"doc {d} sentence {s}")

    @property
    def num_docs(self) -> int:
        return len(self.docs)

    @property
    def num_sentences(self) -> int:
        return sum(len(doc) for doc in self.docs)

    def sentences(self) -> list[str]:
        """All sentences in document order."""
        return [sentence for doc in self.docs for sentence in doc]


@dataclass
class ParallelDocCorpus:
    """Two corpora with identical document and per-document sentence counts."""

    src: DocumentCorpus
    tgt: DocumentCorpus

    def __post_init__(self) -> None:
        if self.src.num_docs != self.tgt.num_docs:
            raise AlignmentError(
                f"document count mismatch: {self.src.language} has {self.src.num_docs}, "
                f"{self.tgt.language} has {self.tgt.num_docs}"
            )
        for d, (sdoc, tdoc) in enumerate(zip(self.src.docs, self.tgt.docs)):
            if len(sdoc) != len(tdoc):
                raise AlignmentError(
                    f"doc {d}: sentence count mismatch ({len(sdoc)} vs {len(tdoc)})"
                )

    @property
    def pair(self) -> tuple[str, str]:
        return (self.src.language, self.tgt.language)

    @property
    def num_docs(self) -> int:
        return self.src.num_docs

    @property
    def num_sentences(self) -> int:
        return self.src.num_sentences


@dataclass
class CorpusStats:
    language: str
    num_docs: int
    num_sentences: int
    sentences_per_doc: dict[int, int]
    tokens_per_sentence: dict[int, int]


def read_doc_corpus(path: str | Path, language: str, skip_header: bool = False) -> DocumentCorpus:
    """Parse a corpus file.

    ``skip_header`` drops a single leading line before parsing; it exists for
    corpus files that carry a provenance line (back-translation outputs).
    """
    path = Path(path)
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusFormatError(
            f"{path}: not valid UTF-8 at byte offset {exc.start}"
        ) from None

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()  # trailing newline
    start = 1 if skip_header and lines else 0

    docs: list[Document] = []
    current: Document = []
    for lineno, line in enumerate(lines[start:], start=start + 1):
        line = line.rstrip("\r")
        if line == "":
            if current:
                docs.append(current)
                current = []
            continue
        sentence = line.strip()
        if sentence == "":
            raise CorpusFormatError(
                f"{path}:{lineno}: whitespace-only line (empty sentence after trimming)"
            )
        current.append(sentence)
    if current:
        docs.append(current)
    return DocumentCorpus(language=language, docs=docs)


def write_doc_corpus(corpus: DocumentCorpus, path: str | Path, header: str | None = None) -> None:
    """Write a corpus file: LF endings, one blank line between docs, trailing newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    parts: list[str] = []
    if header is not None:
        if "\n" in header:
            raise CorpusFormatError("header must be a single line")
        parts.append(header)
    for d, doc in enumerate(corpus.docs):
        if d > 0 or header is not None:
            parts.append("")
        parts.extend(doc)
    data = "\n".join(parts) + "\n" if parts else ""
    path.write_bytes(data.encode("utf-8"))


def read_parallel(
    src_path: str | Path, tgt_path: str | Path, src_lang: str, tgt_lang: str
) -> ParallelDocCorpus:
    """Read both sides of a parallel document corpus and validate alignment."""
    src = read_doc_corpus(src_path, src_lang)
    tgt = read_doc_corpus(tgt_path, tgt_lang)
    return ParallelDocCorpus(src=src, tgt=tgt)


def corpus_stats(corpus: DocumentCorpus) -> CorpusStats:
    """Histogram summary of a corpus."""
    per_doc = Counter(len(doc) for doc in corpus.docs)
    per_sentence = Counter(len(sentence.split()) for sentence in corpus.sentences())
    return CorpusStats(
        language=corpus.language,
        num_docs=corpus.num_docs,
        num_sentences=corpus.num_sentences,
        sentences_per_doc=dict(sorted(per_doc.items())),
        tokens_per_sentence=dict(sorted(per_sentence.items())),
    )
