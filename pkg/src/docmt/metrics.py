"""Evaluation: corpus/document BLEU, gendered-pronoun F1, contrastive scoring.

All scores live in [0, 1]; "one BLEU point" is 0.01.  Tokenization for BLEU
and pronoun F1 is whitespace splitting after whitespace normalization.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .corpus import DocumentCorpus
from .errors import AlignmentError, CorpusFormatError
from .tokenizer import BOS_ID, EOS_ID, SEN_ID, Vocabulary, normalize

GENDERED_PRONOUNS = frozenset(
    {"he", "his", "him", "himself", "she", "her", "hers", "herself"}
)

_EDGE_JUNK = re.compile(r"^[^0-9a-z]+|[^0-9a-z]+$")


@dataclass
class EvalReport:
    """A metric value plus the per-item counts it was computed from."""

    metric: str
    value: float
    counts: dict[str, float]
    breakdown: list[dict[str, float]] = field(default_factory=list)


def _tokens(text: str) -> list[str]:
    norm = normalize(text)
    return norm.split(" ") if norm else []


def _ngram_counts(tokens: list[str], order: int) -> Counter:
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def _segment_counts(hyp: str, ref: str) -> dict[str, float]:
    """Clipped n-gram matches and totals for one segment pair, orders 1..4."""
    hyp_tokens = _tokens(hyp)
    ref_tokens = _tokens(ref)
    row: dict[str, float] = {"hyp_len": len(hyp_tokens), "ref_len": len(ref_tokens)}
    for order in range(1, 5):
        hyp_counts = _ngram_counts(hyp_tokens, order)
        ref_counts = _ngram_counts(ref_tokens, order)
        row[f"match_{order}"] = sum(
            min(count, ref_counts[gram]) for gram, count in hyp_counts.items()
        )
        row[f"total_{order}"] = sum(hyp_counts.values())
    return row


def _bleu_from_counts(counts: dict[str, float]) -> float:
    if counts["hyp_len"] == 0:
        return 0.0
    log_precisions = []
    for order in range(1, 5):
        total = counts[f"total_{order}"]
        match = counts[f"match_{order}"]
        if total == 0 or match == 0:
            return 0.0
        log_precisions.append(0.25 * math.log(match / total))
    brevity = min(1.0, math.exp(1.0 - counts["ref_len"] / counts["hyp_len"]))
    return brevity * math.exp(math.fsum(log_precisions))


def corpus_bleu(hyps: Sequence[str], refs: Sequence[str]) -> float:
    """Corpus-level BLEU-4 with clipped counts and brevity penalty, no smoothing."""
    return bleu_report(hyps, refs).value


def bleu_report(hyps: Sequence[str], refs: Sequence[str], metric: str = "bleu") -> EvalReport:
    if len(hyps) != len(refs):
        raise AlignmentError(f"segment count mismatch: {len(hyps)} hyps vs {len(refs)} refs")
    breakdown = [_segment_counts(h, r) for h, r in zip(hyps, refs)]
    totals: Counter = Counter()
    for row in breakdown:
        totals.update(row)
    counts = {key: float(totals[key]) for key in breakdown[0]} if breakdown else {
        "hyp_len": 0.0,
        "ref_len": 0.0,
        **{f"match_{o}": 0.0 for o in range(1, 5)},
        **{f"total_{o}": 0.0 for o in range(1, 5)},
    }
    return EvalReport(metric=metric, value=_bleu_from_counts(counts), counts=counts,
                      breakdown=breakdown)


def doc_bleu(hyp_corpus: DocumentCorpus, ref_corpus: DocumentCorpus) -> float:
    """BLEU over whole documents: each document's sentences joined by spaces.

    Document counts must match; per-document sentence counts may differ
    (translations can come back with the wrong number of sentences).
    """
    return doc_bleu_report(hyp_corpus, ref_corpus).value


def doc_bleu_report(hyp_corpus: DocumentCorpus, ref_corpus: DocumentCorpus) -> EvalReport:
    if hyp_corpus.num_docs != ref_corpus.num_docs:
        raise AlignmentError(
            f"document count mismatch: {hyp_corpus.num_docs} vs {ref_corpus.num_docs}"
        )
    hyp_docs = [" ".join(doc) for doc in hyp_corpus.docs]
    ref_docs = [" ".join(doc) for doc in ref_corpus.docs]
    return bleu_report(hyp_docs, ref_docs, metric="doc_bleu")


def _pronoun_counts(text: str, pronouns: frozenset[str]) -> Counter:
    counts: Counter = Counter()
    for token in _tokens(text):
        word = _EDGE_JUNK.sub("", token.lower())
        if word in pronouns:
            counts[word] += 1
    return counts


class PronounScore(NamedTuple):
    precision: float
    recall: float
    f1: float


def pronoun_f1(
    hyps: Sequence[str],
    refs: Sequence[str],
    pronouns: frozenset[str] = GENDERED_PRONOUNS,
) -> PronounScore:
    """Clipped-count precision/recall/F1 over gendered pronoun occurrences.

    Tokens are lowercased and stripped of non-alphanumeric edges before the
    pronoun-set lookup.  When neither side contains a pronoun the score is
    (1, 1, 1); when exactly one side has none it is 0.
    """
    counts = pronoun_report(hyps, refs, pronouns).counts
    return _pronoun_score(int(counts["matched"]), int(counts["hyp_total"]),
                          int(counts["ref_total"]))


def pronoun_report(
    hyps: Sequence[str],
    refs: Sequence[str],
    pronouns: frozenset[str] = GENDERED_PRONOUNS,
) -> EvalReport:
    if len(hyps) != len(refs):
        raise AlignmentError(f"segment count mismatch: {len(hyps)} hyps vs {len(refs)} refs")
    matched = hyp_total = ref_total = 0
    breakdown: list[dict[str, float]] = []
    for hyp, ref in zip(hyps, refs):
        hyp_counts = _pronoun_counts(hyp, pronouns)
        ref_counts = _pronoun_counts(ref, pronouns)
        row_match = sum(min(count, ref_counts[word]) for word, count in hyp_counts.items())
        row_hyp = sum(hyp_counts.values())
        row_ref = sum(ref_counts.values())
        matched += row_match
        hyp_total += row_hyp
        ref_total += row_ref
        breakdown.append({"matched": row_match, "hyp_total": row_hyp, "ref_total": row_ref})
    score = _pronoun_score(matched, hyp_total, ref_total)
    return EvalReport(
        metric="pronoun_f1",
        value=score.f1,
        counts={
            "matched": float(matched),
            "hyp_total": float(hyp_total),
            "ref_total": float(ref_total),
            "precision": score.precision,
            "recall": score.recall,
        },
        breakdown=breakdown,
    )


def _pronoun_score(matched: int, hyp_total: int, ref_total: int) -> PronounScore:
    if hyp_total == 0 and ref_total == 0:
        return PronounScore(1.0, 1.0, 1.0)
    precision = matched / hyp_total if hyp_total else 0.0
    recall = matched / ref_total if ref_total else 0.0
    if precision + recall == 0.0:
        return PronounScore(precision, recall, 0.0)
    return PronounScore(precision, recall, 2 * precision * recall / (precision + recall))


@dataclass(frozen=True)
class ContrastiveItem:
    """A source sentence with context and competing target candidates."""

    source: str
    context: tuple[str, ...]
    ref_context: tuple[str, ...]
    candidates: tuple[str, ...]
    correct: int

    def __post_init__(self) -> None:
        if not 0 <= self.correct < len(self.candidates):
            raise CorpusFormatError(
                f"correct index {self.correct} out of range for {len(self.candidates)} candidates"
            )
        if len(self.candidates) < 2:
            raise CorpusFormatError("a contrastive item needs at least two candidates")


def read_contrastive(path: str | Path) -> list[ContrastiveItem]:
    """Read one JSON object per line."""
    items: list[ContrastiveItem] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"{path}:{lineno}: bad JSON ({exc})") from None
        try:
            items.append(
                ContrastiveItem(
                    source=obj["source"],
                    context=tuple(obj["context"]),
                    ref_context=tuple(obj["ref_context"]),
                    candidates=tuple(obj["candidates"]),
                    correct=int(obj["correct"]),
                )
            )
        except KeyError as exc:
            raise CorpusFormatError(f"{path}:{lineno}: missing field {exc}") from None
    return items


def write_contrastive(items: Iterable[ContrastiveItem], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for item in items:
        lines.append(
            json.dumps(
                {
                    "source": item.source,
                    "context": list(item.context),
                    "ref_context": list(item.ref_context),
                    "candidates": list(item.candidates),
                    "correct": item.correct,
                },
                ensure_ascii=False,
                separators=(",", ":"),
            )
        )
    path.write_bytes(("\n".join(lines) + "\n" if lines else "").encode("utf-8"))


def _candidate_ids(
    vocab: Vocabulary,
    item: ContrastiveItem,
    candidate: str,
    context_size: int,
) -> tuple[list[int], list[int], int]:
    """Build (src_ids, tgt_ids, candidate_start) for one candidate."""
    used = min(context_size, len(item.context))
    if len(item.ref_context) < used:
        raise AlignmentError(
            f"item needs {used} reference context translations, has {len(item.ref_context)}"
        )
    src_sents = list(item.context[len(item.context) - used :]) + [item.source]
    ref_sents = list(item.ref_context[len(item.ref_context) - used :])

    src_ids: list[int] = []
    for i, sentence in enumerate(src_sents):
        if i > 0:
            src_ids.append(SEN_ID)
        src_ids.extend(vocab.encode(sentence))
    tgt_ids: list[int] = [BOS_ID]
    for sentence in ref_sents:
        tgt_ids.extend(vocab.encode(sentence))
        tgt_ids.append(SEN_ID)
    candidate_start = len(tgt_ids)
    tgt_ids.extend(vocab.encode(candidate))
    tgt_ids.append(EOS_ID)
    return src_ids, tgt_ids, candidate_start


def score_candidate(params, vocab: Vocabulary, item: ContrastiveItem, candidate: str,
                    lang: str, context_size: int) -> float:
    """Unnormalized sum of target log-probabilities over the candidate span.

    The source is the last ``context_size`` context sentences plus the item's
    source sentence, SEN-joined; the target prefix is the reference context
    translations.  The span covers the candidate's tokens and its EOS.
    """
    from .model import chunk_logprobs

    src_ids, tgt_ids, start = _candidate_ids(vocab, item, candidate, context_size)
    logprobs = chunk_logprobs(params, src_ids, tgt_ids, vocab.lang_index(lang))
    total = 0.0
    for pos in range(start - 1, len(tgt_ids) - 1):
        total += float(logprobs[pos, tgt_ids[pos + 1]])
    return total


def pick_candidate(scores: Sequence[float]) -> int | None:
    """Strict argmax; ``None`` when the maximum is tied."""
    best = max(scores)
    winners = [i for i, s in enumerate(scores) if s == best]
    return winners[0] if len(winners) == 1 else None


def contrastive_accuracy(params, vocab: Vocabulary, items: Sequence[ContrastiveItem],
                         lang: str, context_size: int) -> float:
    """Fraction of items whose correct candidate wins; ties count as wrong."""
    return contrastive_report(params, vocab, items, lang, context_size).value


def contrastive_report(params, vocab: Vocabulary, items: Sequence[ContrastiveItem],
                       lang: str, context_size: int) -> EvalReport:
    if not items:
        raise AlignmentError("contrastive item list is empty")
    correct = 0
    breakdown: list[dict[str, float]] = []
    for item in items:
        scores = [
            score_candidate(params, vocab, item, cand, lang, context_size)
            for cand in item.candidates
        ]
        picked = pick_candidate(scores)
        hit = picked == item.correct
        correct += int(hit)
        ordered = sorted(scores, reverse=True)
        breakdown.append(
            {
                "correct": float(hit),
                "picked": -1.0 if picked is None else float(picked),
                "margin": ordered[0] - ordered[1],
            }
        )
    n = len(items)
    accuracy = correct / n
    ci95 = 1.96 * math.sqrt(accuracy * (1.0 - accuracy) / n)
    return EvalReport(
        metric="contrastive_accuracy",
        value=accuracy,
        counts={"correct": float(correct), "items": float(n), "ci95": ci95},
        breakdown=breakdown,
    )


def write_report(report: EvalReport, path: str | Path) -> None:
    """Write a report as '#'-prefixed summary lines plus a TSV breakdown."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# metric\t{report.metric}", f"# value\t{report.value:.6f}"]
    for key in sorted(report.counts):
        lines.append(f"# {key}\t{_fmt(report.counts[key])}")
    if report.breakdown:
        columns = list(report.breakdown[0])
        lines.append("\t".join(columns))
        for row in report.breakdown:
            lines.append("\t".join(_fmt(row[c]) for c in columns))
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def _fmt(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return f"{value:.6f}"
