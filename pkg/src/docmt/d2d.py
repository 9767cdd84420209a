"""Document-to-chunk conversion and training-example construction.

A document is cut into consecutive, non-overlapping chunks of ``chunk_size``
sentences (the final chunk may be shorter).  A chunk pair becomes a training
example by encoding each sentence, joining source sentences with the SEN
separator, and wrapping the target in BOS ... EOS with SEN separators inside.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import Document, ParallelDocCorpus
from .errors import AlignmentError, ConfigError
from .tokenizer import BOS_ID, EOS_ID, SEN_ID, Vocabulary

MAX_SEN_TOKENS = 100
MAX_DOC_TOKENS = 512


@dataclass(frozen=True)
class Chunk:
    """``k`` consecutive sentences of one document."""

    sentences: tuple[str, ...]
    doc_index: int
    start: int

    @property
    def k(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class TrainingExample:
    """One encoded source/target pair ready for batching."""

    src_ids: tuple[int, ...]
    tgt_ids: tuple[int, ...]  # BOS ... EOS
    lang_id: int  # language-token id naming the pair (source side by default)
    k: int  # sentences per side
    truncated: bool

    @property
    def is_document(self) -> bool:
        return self.k > 1


@dataclass(frozen=True)
class SplitResult:
    """Sentences recovered from decoded ids, plus what was dropped."""

    sentences: tuple[str, ...]
    dropped_empty: int


def chunk_document(doc: Document, chunk_size: int, doc_index: int = 0) -> list[Chunk]:
    """Cut ``doc`` into consecutive chunks of ``chunk_size`` sentences.

    The final chunk keeps whatever remains, so it may hold fewer sentences;
    every sentence appears in exactly one chunk.
    """
    if chunk_size < 1:
        raise ConfigError(f"chunk_size must be >= 1, got {chunk_size}")
    if not doc:
        raise ConfigError("cannot chunk an empty document")
    return [
        Chunk(sentences=tuple(doc[start : start + chunk_size]), doc_index=doc_index, start=start)
        for start in range(0, len(doc), chunk_size)
    ]


def make_training_example(
    src: Chunk,
    tgt: Chunk,
    lang_id: int,
    vocab: Vocabulary,
    mode: str = "document",
) -> TrainingExample:
    """Encode a chunk pair into one training example.

    In sentence mode both chunks must hold exactly one sentence and the
    length limit is MAX_SEN_TOKENS; in document mode it is MAX_DOC_TOKENS.
    Over-long sides are truncated by dropping trailing ids; a truncated
    target keeps EOS as its final id.
    """
    if mode not in ("sentence", "document"):
        raise ConfigError(f"mode must be 'sentence' or 'document', got {mode!r}")
    if src.k != tgt.k:
        raise AlignmentError(f"chunk sentence counts differ: {src.k} vs {tgt.k}")
    if mode == "sentence" and src.k != 1:
        raise ConfigError(f"sentence mode requires 1-sentence chunks, got k={src.k}")
    limit = MAX_SEN_TOKENS if mode == "sentence" else MAX_DOC_TOKENS

    src_ids: list[int] = []
    for i, sentence in enumerate(src.sentences):
        if i > 0:
            src_ids.append(SEN_ID)
        src_ids.extend(vocab.encode(sentence))
    tgt_ids: list[int] = [BOS_ID]
    for i, sentence in enumerate(tgt.sentences):
        if i > 0:
            tgt_ids.append(SEN_ID)
        tgt_ids.extend(vocab.encode(sentence))
    tgt_ids.append(EOS_ID)

    truncated = False
    if len(src_ids) > limit:
        src_ids = src_ids[:limit]
        truncated = True
    if len(tgt_ids) > limit:
        tgt_ids = tgt_ids[: limit - 1] + [EOS_ID]
        truncated = True
    return TrainingExample(
        src_ids=tuple(src_ids),
        tgt_ids=tuple(tgt_ids),
        lang_id=lang_id,
        k=src.k,
        truncated=truncated,
    )


def split_translation(ids: list[int], vocab: Vocabulary) -> SplitResult:
    """Split output ids on SEN separators and decode each segment.

    BOS/EOS ids are stripped first.  Segments that decode to the empty
    string are dropped and counted rather than kept.
    """
    body = [int(i) for i in ids if int(i) not in (BOS_ID, EOS_ID)]
    segments: list[list[int]] = [[]]
    for token_id in body:
        if token_id == SEN_ID:
            segments.append([])
        else:
            segments[-1].append(token_id)
    sentences: list[str] = []
    dropped = 0
    for segment in segments:
        text = vocab.decode(segment)
        if text:
            sentences.append(text)
        else:
            dropped += 1
    return SplitResult(sentences=tuple(sentences), dropped_empty=dropped)


def reassemble(chunks: list[Chunk]) -> Document:
    """Concatenate chunk sentences back into the original document."""
    out: list[str] = []
    for chunk in chunks:
        out.extend(chunk.sentences)
    return out


def document_examples(
    parallel: ParallelDocCorpus,
    vocab: Vocabulary,
    chunk_size: int,
    lang: str | None = None,
) -> list[TrainingExample]:
    """Chunk every document pair and encode each chunk pair.

    ``lang`` names the pair for the language token; it defaults to the source
    language and is passed explicitly when the shared language is the source
    (one-to-many directions, where the token must name the target).
    """
    lang_id = vocab.lang_token_id(lang or parallel.src.language)
    examples: list[TrainingExample] = []
    for d, (sdoc, tdoc) in enumerate(zip(parallel.src.docs, parallel.tgt.docs)):
        src_chunks = chunk_document(sdoc, chunk_size, doc_index=d)
        tgt_chunks = chunk_document(tdoc, chunk_size, doc_index=d)
        for schunk, tchunk in zip(src_chunks, tgt_chunks):
            examples.append(
                make_training_example(schunk, tchunk, lang_id, vocab, mode="document")
            )
    return examples


def write_examples(examples: list[TrainingExample], path: str | Path) -> None:
    """Cache encoded examples as JSON lines (ids only, no text)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for ex in examples:
        rows.append(json.dumps(
            {"src": list(ex.src_ids), "tgt": list(ex.tgt_ids), "lang": ex.lang_id,
             "k": ex.k, "truncated": ex.truncated},
            sort_keys=True, separators=(",", ":"),
        ))
    path.write_bytes(("\n".join(rows) + "\n").encode("utf-8") if rows else b"")


def read_examples(path: str | Path) -> list[TrainingExample]:
    examples: list[TrainingExample] = []
    text = Path(path).read_text(encoding="utf-8")
    for n, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        try:
            row = json.loads(line)
            examples.append(TrainingExample(
                src_ids=tuple(int(i) for i in row["src"]),
                tgt_ids=tuple(int(i) for i in row["tgt"]),
                lang_id=int(row["lang"]), k=int(row["k"]),
                truncated=bool(row["truncated"]),
            ))
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"{path}:{n}: bad example cache row: {exc}") from None
    return examples


def sentence_examples(parallel: ParallelDocCorpus, vocab: Vocabulary,
                      lang: str | None = None) -> list[TrainingExample]:
    """Encode every aligned sentence pair as an independent example."""
    lang_id = vocab.lang_token_id(lang or parallel.src.language)
    examples: list[TrainingExample] = []
    for d, (sdoc, tdoc) in enumerate(zip(parallel.src.docs, parallel.tgt.docs)):
        for s, (ssent, tsent) in enumerate(zip(sdoc, tdoc)):
            schunk = Chunk(sentences=(ssent,), doc_index=d, start=s)
            tchunk = Chunk(sentences=(tsent,), doc_index=d, start=s)
            examples.append(
                make_training_example(schunk, tchunk, lang_id, vocab, mode="sentence")
            )
    return examples
