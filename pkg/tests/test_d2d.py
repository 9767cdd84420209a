"""Chunking, example construction, and output splitting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docmt.corpus import DocumentCorpus, ParallelDocCorpus
from docmt.d2d import (MAX_DOC_TOKENS, MAX_SEN_TOKENS, Chunk, chunk_document,
                       document_examples, make_training_example, read_examples,
                       reassemble, sentence_examples, split_translation, write_examples)
from docmt.errors import AlignmentError, ConfigError
from docmt.tokenizer import BOS_ID, EOS_ID, SEN_ID, train_bpe

VOCAB = train_bpe(
    ["the king sees the book", "the queen holds the lamp", "he opens the door"],
    150,
    languages=("aa", "en"),
)


def test_chunk_document_shapes():
    doc = [f"s{i}" for i in range(7)]
    chunks = chunk_document(doc, 3)
    assert [c.k for c in chunks] == [3, 3, 1]
    assert [c.start for c in chunks] == [0, 3, 6]
    assert all(c.doc_index == 0 for c in chunks)


def test_chunk_size_one_is_per_sentence():
    doc = ["a", "b", "c"]
    chunks = chunk_document(doc, 1)
    assert [c.sentences for c in chunks] == [("a",), ("b",), ("c",)]


def test_chunk_document_rejects_bad_size():
    with pytest.raises(ConfigError, match="chunk_size"):
        chunk_document(["a"], 0)


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.sampled_from(["alpha", "beta", "gamma", "delta"]), min_size=1, max_size=25),
    st.integers(min_value=1, max_value=8),
)
def test_chunk_reassemble_roundtrip(doc, chunk_size):
    chunks = chunk_document(doc, chunk_size)
    assert reassemble(chunks) == doc
    # non-overlap and full coverage
    assert sum(c.k for c in chunks) == len(doc)
    starts = [c.start for c in chunks]
    assert starts == sorted(starts)
    for prev, cur in zip(chunks, chunks[1:]):
        assert prev.start + prev.k == cur.start


def test_training_example_layout():
    src = Chunk(sentences=("the king", "the queen"), doc_index=0, start=0)
    tgt = Chunk(sentences=("the book", "the lamp"), doc_index=0, start=0)
    ex = make_training_example(src, tgt, VOCAB.lang_token_id("aa"), VOCAB)
    assert ex.k == 2
    assert ex.is_document
    assert not ex.truncated
    assert ex.src_ids.count(SEN_ID) == 1
    assert ex.tgt_ids[0] == BOS_ID
    assert ex.tgt_ids[-1] == EOS_ID
    assert ex.tgt_ids.count(SEN_ID) == 1
    assert BOS_ID not in ex.src_ids and EOS_ID not in ex.src_ids


def test_sen_count_matches_k_minus_one():
    for k in range(1, 6):
        sents = tuple("the king" for _ in range(k))
        chunk = Chunk(sentences=sents, doc_index=0, start=0)
        ex = make_training_example(chunk, chunk, VOCAB.lang_token_id("aa"), VOCAB)
        assert ex.src_ids.count(SEN_ID) == k - 1
        assert ex.tgt_ids.count(SEN_ID) == k - 1


def test_sentence_mode_rejects_multi_sentence_chunks():
    chunk = Chunk(sentences=("a", "b"), doc_index=0, start=0)
    with pytest.raises(ConfigError, match="sentence mode"):
        make_training_example(chunk, chunk, 5, VOCAB, mode="sentence")


def test_mismatched_k_rejected():
    a = Chunk(sentences=("x",), doc_index=0, start=0)
    b = Chunk(sentences=("x", "y"), doc_index=0, start=0)
    with pytest.raises(AlignmentError, match="differ"):
        make_training_example(a, b, 5, VOCAB)


def test_unknown_mode_rejected():
    chunk = Chunk(sentences=("a",), doc_index=0, start=0)
    with pytest.raises(ConfigError, match="mode"):
        make_training_example(chunk, chunk, 5, VOCAB, mode="word")


def _long_chunk(words: int) -> Chunk:
    return Chunk(sentences=(" ".join(["king"] * words),), doc_index=0, start=0)


def test_sentence_truncation_limits():
    ex = make_training_example(_long_chunk(300), _long_chunk(300),
                               VOCAB.lang_token_id("aa"), VOCAB, mode="sentence")
    assert ex.truncated
    assert len(ex.src_ids) == MAX_SEN_TOKENS
    assert len(ex.tgt_ids) == MAX_SEN_TOKENS
    assert ex.tgt_ids[-1] == EOS_ID


def test_document_truncation_limits():
    src = Chunk(sentences=tuple(" ".join(["king"] * 200) for _ in range(3)),
                doc_index=0, start=0)
    ex = make_training_example(src, src, VOCAB.lang_token_id("aa"), VOCAB)
    assert ex.truncated
    assert len(ex.src_ids) == MAX_DOC_TOKENS
    assert len(ex.tgt_ids) == MAX_DOC_TOKENS
    assert ex.tgt_ids[-1] == EOS_ID


def test_untruncated_example_keeps_everything():
    chunk = Chunk(sentences=("the king sees the book",), doc_index=0, start=0)
    ex = make_training_example(chunk, chunk, VOCAB.lang_token_id("aa"), VOCAB,
                               mode="sentence")
    assert not ex.truncated
    assert ex.tgt_ids == (BOS_ID, *ex.src_ids, EOS_ID)


def test_split_translation_roundtrip():
    sentences = ("the king sees", "the queen holds")
    ids: list[int] = [BOS_ID]
    for i, s in enumerate(sentences):
        if i:
            ids.append(SEN_ID)
        ids.extend(VOCAB.encode(s))
    ids.append(EOS_ID)
    result = split_translation(ids, VOCAB)
    assert result.sentences == sentences
    assert result.dropped_empty == 0


def test_split_translation_drops_empty_segments():
    ids = [BOS_ID, SEN_ID, *VOCAB.encode("the king"), SEN_ID, EOS_ID]
    result = split_translation(ids, VOCAB)
    assert result.sentences == ("the king",)
    assert result.dropped_empty == 2


def _toy_pair() -> ParallelDocCorpus:
    src = DocumentCorpus("aa", [["the king sees", "the queen holds", "he opens",
                                 "the king sees"], ["the queen holds"]])
    tgt = DocumentCorpus("en", [["the book", "the lamp", "the door", "the book"],
                                ["the lamp"]])
    return ParallelDocCorpus(src=src, tgt=tgt)


def test_document_examples_chunks_every_doc():
    examples = document_examples(_toy_pair(), VOCAB, 3)
    assert [ex.k for ex in examples] == [3, 1, 1]
    assert all(ex.lang_id == VOCAB.lang_token_id("aa") for ex in examples)


def test_sentence_examples_one_per_sentence():
    examples = sentence_examples(_toy_pair(), VOCAB)
    assert len(examples) == 5
    assert all(ex.k == 1 for ex in examples)
    assert all(not ex.is_document for ex in examples)


def test_lang_override_for_shared_source():
    pair = _toy_pair()
    reversed_pair = ParallelDocCorpus(src=pair.tgt, tgt=pair.src)
    examples = sentence_examples(reversed_pair, VOCAB, lang="aa")
    assert all(ex.lang_id == VOCAB.lang_token_id("aa") for ex in examples)


def test_example_cache_roundtrip(tmp_path):
    examples = document_examples(_toy_pair(), VOCAB, 2)
    path = tmp_path / "cache.jsonl"
    write_examples(examples, path)
    loaded = read_examples(path)
    assert loaded == examples


def test_example_cache_rejects_garbage(tmp_path):
    path = tmp_path / "cache.jsonl"
    path.write_text('{"src": "oops"}\n', encoding="utf-8")
    with pytest.raises(ConfigError, match="cache"):
        read_examples(path)
