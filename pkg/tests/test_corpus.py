"""Corpus container and file-format tests."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docmt.corpus import (CorpusStats, DocumentCorpus, ParallelDocCorpus, corpus_stats,
                          read_doc_corpus, read_parallel, write_doc_corpus)
from docmt.errors import AlignmentError, CorpusFormatError


def test_basic_container_counts():
    corpus = DocumentCorpus("xx", [["a b", "c d"], ["e f"]])
    assert corpus.num_docs == 2
    assert corpus.num_sentences == 3
    assert corpus.sentences() == ["a b", "c d", "e f"]


def test_empty_document_rejected():
    with pytest.raises(CorpusFormatError, match="zero sentences"):
        DocumentCorpus("xx", [["a"], []])


def test_empty_sentence_rejected():
    with pytest.raises(CorpusFormatError, match="empty sentence"):
        DocumentCorpus("xx", [["a", ""]])


def test_untrimmed_sentence_rejected():
    with pytest.raises(CorpusFormatError, match="whitespace"):
        DocumentCorpus("xx", [["a ", "b"]])


def test_read_two_docs(tmp_path):
    path = tmp_path / "c.txt"
    path.write_bytes(b"a b\nc d\n\ne f\n")
    corpus = read_doc_corpus(path, "xx")
    assert corpus.docs == [["a b", "c d"], ["e f"]]


def test_read_collapses_multiple_blank_lines(tmp_path):
    path = tmp_path / "c.txt"
    path.write_bytes(b"a\n\n\n\nb\n")
    assert read_doc_corpus(path, "xx").docs == [["a"], ["b"]]


def test_read_without_trailing_newline(tmp_path):
    path = tmp_path / "c.txt"
    path.write_bytes(b"a\n\nb")
    assert read_doc_corpus(path, "xx").docs == [["a"], ["b"]]


def test_whitespace_only_line_error_names_line(tmp_path):
    path = tmp_path / "c.txt"
    path.write_bytes(b"a\n   \nb\n")
    with pytest.raises(CorpusFormatError, match=r":2"):
        read_doc_corpus(path, "xx")


def test_non_utf8_error_names_byte_offset(tmp_path):
    path = tmp_path / "c.txt"
    path.write_bytes(b"ok\n\xff\xfe\n")
    with pytest.raises(CorpusFormatError, match="byte offset 3"):
        read_doc_corpus(path, "xx")


def test_write_read_roundtrip_and_bytes(tmp_path):
    corpus = DocumentCorpus("xx", [["a b", "c d"], ["e f"]])
    path = tmp_path / "c.txt"
    write_doc_corpus(corpus, path)
    assert path.read_bytes() == b"a b\nc d\n\ne f\n"
    assert read_doc_corpus(path, "xx").docs == corpus.docs


def test_write_is_deterministic(tmp_path):
    corpus = DocumentCorpus("xx", [["one"], ["two", "three"]])
    first = tmp_path / "a.txt"
    second = tmp_path / "b.txt"
    write_doc_corpus(corpus, first)
    write_doc_corpus(corpus, second)
    assert first.read_bytes() == second.read_bytes()


def test_header_roundtrip(tmp_path):
    corpus = DocumentCorpus("xx", [["a"], ["b"]])
    path = tmp_path / "c.txt"
    write_doc_corpus(corpus, path, header="#bt {}")
    assert path.read_text(encoding="utf-8").startswith("#bt {}\n")
    assert read_doc_corpus(path, "xx", skip_header=True).docs == corpus.docs


def test_multiline_header_rejected(tmp_path):
    corpus = DocumentCorpus("xx", [["a"]])
    with pytest.raises(CorpusFormatError, match="single line"):
        write_doc_corpus(corpus, tmp_path / "c.txt", header="a\nb")


@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.lists(st.text(alphabet="abc xyz", min_size=1).map(lambda s: " ".join(s.split())).filter(bool),
                 min_size=1, max_size=5),
        min_size=1, max_size=6,
    )
)
def test_roundtrip_property(tmp_path_factory, docs):
    corpus = DocumentCorpus("xx", docs)
    path = tmp_path_factory.mktemp("prop") / "c.txt"
    write_doc_corpus(corpus, path)
    assert read_doc_corpus(path, "xx").docs == corpus.docs


def test_parallel_doc_count_mismatch():
    src = DocumentCorpus("aa", [["x"]])
    tgt = DocumentCorpus("en", [["x"], ["y"]])
    with pytest.raises(AlignmentError, match="document count"):
        ParallelDocCorpus(src=src, tgt=tgt)


def test_parallel_sentence_count_mismatch_names_doc():
    src = DocumentCorpus("aa", [["x"], ["y", "z"]])
    tgt = DocumentCorpus("en", [["x"], ["y"]])
    with pytest.raises(AlignmentError, match="doc 1"):
        ParallelDocCorpus(src=src, tgt=tgt)


def test_read_parallel(tmp_path):
    (tmp_path / "s.txt").write_bytes(b"a\nb\n\nc\n")
    (tmp_path / "t.txt").write_bytes(b"A\nB\n\nC\n")
    pair = read_parallel(tmp_path / "s.txt", tmp_path / "t.txt", "aa", "en")
    assert pair.pair == ("aa", "en")
    assert pair.num_docs == 2
    assert pair.num_sentences == 3


def test_corpus_stats_histograms():
    corpus = DocumentCorpus("xx", [["a b", "c"], ["d e f"]])
    stats = corpus_stats(corpus)
    assert isinstance(stats, CorpusStats)
    assert stats.num_docs == 2
    assert stats.num_sentences == 3
    assert stats.sentences_per_doc == {1: 1, 2: 1}
    assert stats.tokens_per_sentence == {1: 1, 2: 1, 3: 1}
