"""Constrained beam search plus sentence- and document-level inference.

Document inference suppresses EOS until the hypothesis has produced one SEN
separator fewer than the required sentence count, so a chunk translation
cannot terminate before it has room for every sentence.  Scores are length
normalized by ((5 + len) / 6) ** alpha and finished hypotheses compete only
at termination: the best finished one wins, otherwise the best unfinished
hypothesis is returned with a forced-stop flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .d2d import MAX_DOC_TOKENS, MAX_SEN_TOKENS, chunk_document, split_translation
from .errors import ConfigError, NumericError
from .model import ModelParams, position_encoding
from .tokenizer import BOS_ID, EOS_ID, PAD_ID, SEN_ID, Vocabulary


def length_penalty(length: int, alpha: float) -> float:
    """GNMT-style penalty ((5 + length) / 6) ** alpha."""
    return ((5.0 + length) / 6.0) ** alpha


@dataclass(frozen=True)
class BeamConfig:
    beam_size: int = 4
    alpha: float = 0.6
    max_len: int | None = None  # None picks 2 * source length + 50

    def __post_init__(self) -> None:
        if self.beam_size < 1:
            raise ConfigError(f"beam_size must be >= 1, got {self.beam_size}")
        if self.alpha < 0.0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.max_len is not None and self.max_len < 1:
            raise ConfigError(f"max_len must be >= 1, got {self.max_len}")


@dataclass(frozen=True)
class Hypothesis:
    ids: tuple[int, ...]
    logprob: float
    sen_count: int
    finished: bool
    forced_stop: bool
    score: float  # logprob / length_penalty(len(ids), alpha)


class Scorer(Protocol):
    """Anything that can drive the next-token distribution of a decode."""

    vocab_size: int

    def start(self, src_ids, lang_index: int): ...

    def step(self, state, prev_id: int) -> tuple[np.ndarray, object]: ...


def beam_search(
    scorer: Scorer,
    src_ids,
    lang_index: int,
    config: BeamConfig,
    required_sens: int = 1,
) -> Hypothesis:
    """Best constrained hypothesis for one source chunk.

    PAD and BOS are never generated; EOS stays masked until the hypothesis
    holds ``required_sens - 1`` SEN tokens.  Search stops when no unfinished
    hypothesis can beat the best finished score even at maximum length.
    """
    src_ids = list(src_ids)
    if not src_ids:
        raise ConfigError("cannot decode an empty source")
    if required_sens < 1:
        raise ConfigError(f"required_sens must be >= 1, got {required_sens}")
    max_len = config.max_len if config.max_len is not None else 2 * len(src_ids) + 50
    beam = config.beam_size
    vocab = scorer.vocab_size

    state = scorer.start(src_ids, lang_index)
    logprobs, state = scorer.step(state, BOS_ID)
    frontier: list[tuple[Hypothesis, object, np.ndarray]] = [
        (
            Hypothesis(ids=(), logprob=0.0, sen_count=0, finished=False,
                       forced_stop=False, score=0.0),
            state,
            np.asarray(logprobs, dtype=np.float64),
        )
    ]
    finished: list[Hypothesis] = []

    for _ in range(max_len):
        rows = np.stack([lp for _, _, lp in frontier])
        rows[:, PAD_ID] = -np.inf
        rows[:, BOS_ID] = -np.inf
        for i, (hyp, _, _) in enumerate(frontier):
            if hyp.sen_count < required_sens - 1:
                rows[i, EOS_ID] = -np.inf
        acc = rows + np.asarray([[hyp.logprob] for hyp, _, _ in frontier])
        flat = acc.reshape(-1)
        k = min(2 * beam, flat.size)
        top = np.argpartition(-flat, k - 1)[:k]
        top = top[np.argsort(-flat[top], kind="stable")]

        next_frontier: list[tuple[Hypothesis, object, np.ndarray]] = []
        for index in top:
            score_acc = float(flat[index])
            if score_acc == -np.inf:
                break
            parent_pos, token = divmod(int(index), vocab)
            parent, parent_state, _ = frontier[parent_pos]
            ids = parent.ids + (token,)
            if token == EOS_ID:
                finished.append(
                    Hypothesis(ids=ids, logprob=score_acc, sen_count=parent.sen_count,
                               finished=True, forced_stop=False,
                               score=score_acc / length_penalty(len(ids), config.alpha))
                )
                continue
            if len(next_frontier) >= beam:
                continue
            new_logprobs, new_state = scorer.step(parent_state, token)
            hyp = Hypothesis(
                ids=ids,
                logprob=score_acc,
                sen_count=parent.sen_count + (1 if token == SEN_ID else 0),
                finished=False,
                forced_stop=False,
                score=score_acc / length_penalty(len(ids), config.alpha),
            )
            next_frontier.append((hyp, new_state, np.asarray(new_logprobs, dtype=np.float64)))

        finished.sort(key=lambda h: h.score, reverse=True)
        del finished[beam:]
        frontier = next_frontier
        if not frontier:
            break
        if finished:
            best_finished = finished[0].score
            bound = max(
                hyp.logprob / length_penalty(max_len, config.alpha) for hyp, _, _ in frontier
            )
            if bound <= best_finished:
                break

    if finished:
        return finished[0]
    if not frontier:
        # every candidate scored -inf at some step; a real scorer cannot do
        # this, so surface it rather than return an arbitrary hypothesis
        raise NumericError("beam search exhausted: no finished or partial hypotheses")
    # nothing terminated: hand back the best partial hypothesis, flagged
    best, _, _ = max(frontier, key=lambda item: item[0].score)
    return Hypothesis(ids=best.ids, logprob=best.logprob, sen_count=best.sen_count,
                      finished=False, forced_stop=True, score=best.score)


def _ln_rows(x: np.ndarray, g: np.ndarray, b: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / np.sqrt(var + np.asarray(eps, dtype=x.dtype)) * g + b


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class DecodeState:
    """Immutable incremental-decode state; extending a beam shares caches."""

    position: int
    self_k: tuple[tuple[np.ndarray, ...], ...]  # per layer, per consumed token (d,)
    self_v: tuple[tuple[np.ndarray, ...], ...]
    cross_k: tuple[np.ndarray, ...]  # per layer (H, S, dh)
    cross_v: tuple[np.ndarray, ...]


class NeuralScorer:
    """Incremental decoder over trained model weights with per-beam KV caches."""

    def __init__(self, params: ModelParams) -> None:
        self.params = params
        self.config = params.config
        self.vocab_size = params.config.vocab_size
        self._pos = position_encoding(
            params.config.max_positions, params.config.d_model, params.dtype
        )

    def _heads(self, row: np.ndarray) -> np.ndarray:
        config = self.config
        return row.reshape(config.heads, config.d_model // config.heads)

    def start(self, src_ids, lang_index: int) -> DecodeState:
        config = self.config
        t = self.params.tensors
        src = np.asarray(src_ids, dtype=np.int64)
        if len(src) > config.max_positions:
            raise ConfigError(
                f"source length {len(src)} exceeds max_positions {config.max_positions}"
            )
        if not 0 <= lang_index < len(config.languages):
            raise ConfigError(f"language index {lang_index} out of range")
        d, heads = config.d_model, config.heads
        dh = d // heads
        scale = np.asarray(math.sqrt(d), dtype=self.params.dtype)

        x = t["tok_emb"][src] * scale + self._pos[: len(src)] + t["lang_emb"][lang_index]
        for i in range(config.layers):
            p = f"enc{i}"
            h = _ln_rows(x, t[f"{p}.ln1.g"], t[f"{p}.ln1.b"])
            q = (h @ t[f"{p}.attn.wq"] + t[f"{p}.attn.bq"]).reshape(-1, heads, dh)
            k = (h @ t[f"{p}.attn.wk"] + t[f"{p}.attn.bk"]).reshape(-1, heads, dh)
            v = (h @ t[f"{p}.attn.wv"] + t[f"{p}.attn.bv"]).reshape(-1, heads, dh)
            scores = np.einsum("qhd,khd->hqk", q, k) / np.asarray(math.sqrt(dh), x.dtype)
            probs = _softmax_rows(scores)
            ctx = np.einsum("hqk,khd->qhd", probs, v).reshape(-1, d)
            x = x + (ctx @ t[f"{p}.attn.wo"] + t[f"{p}.attn.bo"])
            h = _ln_rows(x, t[f"{p}.ln2.g"], t[f"{p}.ln2.b"])
            mid = np.maximum(h @ t[f"{p}.ffn.w1"] + t[f"{p}.ffn.b1"], 0)
            x = x + (mid @ t[f"{p}.ffn.w2"] + t[f"{p}.ffn.b2"])
        enc_out = _ln_rows(x, t["enc.ln.g"], t["enc.ln.b"])

        cross_k = []
        cross_v = []
        for i in range(config.layers):
            p = f"dec{i}.cross"
            k = (enc_out @ t[f"{p}.wk"] + t[f"{p}.bk"]).reshape(-1, heads, dh)
            v = (enc_out @ t[f"{p}.wv"] + t[f"{p}.bv"]).reshape(-1, heads, dh)
            cross_k.append(np.ascontiguousarray(k.transpose(1, 0, 2)))
            cross_v.append(np.ascontiguousarray(v.transpose(1, 0, 2)))
        return DecodeState(
            position=0,
            self_k=tuple(() for _ in range(config.layers)),
            self_v=tuple(() for _ in range(config.layers)),
            cross_k=tuple(cross_k),
            cross_v=tuple(cross_v),
        )

    def step(self, state: DecodeState, prev_id: int) -> tuple[np.ndarray, DecodeState]:
        config = self.config
        t = self.params.tensors
        d, heads = config.d_model, config.heads
        dh = d // heads
        pos = state.position
        if pos >= config.max_positions:
            raise ConfigError(f"decode position {pos} exceeds max_positions")
        scale = np.asarray(math.sqrt(d), dtype=self.params.dtype)
        sqrt_dh = np.asarray(math.sqrt(dh), dtype=self.params.dtype)

        x = t["tok_emb"][prev_id] * scale + self._pos[pos]
        new_k: list[tuple[np.ndarray, ...]] = []
        new_v: list[tuple[np.ndarray, ...]] = []
        for i in range(config.layers):
            p = f"dec{i}"
            h = _ln_rows(x, t[f"{p}.ln1.g"], t[f"{p}.ln1.b"])
            q = self._heads(h @ t[f"{p}.self.wq"] + t[f"{p}.self.bq"])
            k_row = h @ t[f"{p}.self.wk"] + t[f"{p}.self.bk"]
            v_row = h @ t[f"{p}.self.wv"] + t[f"{p}.self.bv"]
            ks = state.self_k[i] + (k_row,)
            vs = state.self_v[i] + (v_row,)
            new_k.append(ks)
            new_v.append(vs)
            K = np.stack(ks).reshape(-1, heads, dh)  # (t+1, H, dh)
            V = np.stack(vs).reshape(-1, heads, dh)
            scores = np.einsum("hd,khd->hk", q, K) / sqrt_dh
            probs = _softmax_rows(scores)
            ctx = np.einsum("hk,khd->hd", probs, V).reshape(d)
            x = x + (ctx @ t[f"{p}.self.wo"] + t[f"{p}.self.bo"])

            h = _ln_rows(x, t[f"{p}.ln2.g"], t[f"{p}.ln2.b"])
            q = self._heads(h @ t[f"{p}.cross.wq"] + t[f"{p}.cross.bq"])
            scores = np.einsum("hd,hkd->hk", q, state.cross_k[i]) / sqrt_dh
            probs = _softmax_rows(scores)
            ctx = np.einsum("hk,hkd->hd", probs, state.cross_v[i]).reshape(d)
            x = x + (ctx @ t[f"{p}.cross.wo"] + t[f"{p}.cross.bo"])

            h = _ln_rows(x, t[f"{p}.ln3.g"], t[f"{p}.ln3.b"])
            mid = np.maximum(h @ t[f"{p}.ffn.w1"] + t[f"{p}.ffn.b1"], 0)
            x = x + (mid @ t[f"{p}.ffn.w2"] + t[f"{p}.ffn.b2"])

        x = _ln_rows(x, t["dec.ln.g"], t["dec.ln.b"])
        logits = (x @ t["tok_emb"].T).astype(np.float64)
        shifted = logits - logits.max()
        logprobs = shifted - math.log(np.exp(shifted).sum())
        new_state = DecodeState(
            position=pos + 1,
            self_k=tuple(new_k),
            self_v=tuple(new_v),
            cross_k=state.cross_k,
            cross_v=state.cross_v,
        )
        return logprobs, new_state


@dataclass
class TranslationResult:
    """Decoded sentences plus structural diagnostics."""

    sentences: list[str]
    expected_sentences: int
    chunks: int = 0
    mismatched_chunks: int = 0
    forced_stops: int = 0
    dropped_empty: int = 0
    empty_outputs: int = 0

    @property
    def count_preserved(self) -> bool:
        return len(self.sentences) == self.expected_sentences


def _truncate(ids: list[int], limit: int) -> list[int]:
    return ids[:limit] if len(ids) > limit else ids


def sen_infer(params: ModelParams, vocab: Vocabulary, doc: list[str], lang: str,
              config: BeamConfig = BeamConfig()) -> TranslationResult:
    """Translate each sentence independently; output count always matches."""
    scorer = NeuralScorer(params)
    lang_index = vocab.lang_index(lang)
    result = TranslationResult(sentences=[], expected_sentences=len(doc))
    for sentence in doc:
        src = _truncate(vocab.encode(sentence), MAX_SEN_TOKENS)
        hyp = beam_search(scorer, src, lang_index, config, required_sens=1)
        result.forced_stops += int(hyp.forced_stop)
        split = split_translation(list(hyp.ids), vocab)
        result.dropped_empty += split.dropped_empty
        text = " ".join(split.sentences)
        if not text:
            text = "[UNK]"
            result.empty_outputs += 1
        result.sentences.append(text)
    return result


def doc_infer(params: ModelParams, vocab: Vocabulary, doc: list[str], lang: str,
              chunk_size: int, config: BeamConfig = BeamConfig()) -> TranslationResult:
    """Translate chunk by chunk with the sentence-count constraint.

    The output sentence count equals the input count whenever the model
    emits exactly the required separators; mismatches and forced stops are
    reported in the diagnostics rather than papered over.
    """
    scorer = NeuralScorer(params)
    lang_index = vocab.lang_index(lang)
    result = TranslationResult(sentences=[], expected_sentences=len(doc))
    for chunk in chunk_document(doc, chunk_size):
        src: list[int] = []
        for i, sentence in enumerate(chunk.sentences):
            if i > 0:
                src.append(SEN_ID)
            src.extend(vocab.encode(sentence))
        src = _truncate(src, MAX_DOC_TOKENS)
        hyp = beam_search(scorer, src, lang_index, config, required_sens=chunk.k)
        split = split_translation(list(hyp.ids), vocab)
        result.chunks += 1
        result.forced_stops += int(hyp.forced_stop)
        result.dropped_empty += split.dropped_empty
        result.mismatched_chunks += int(len(split.sentences) != chunk.k)
        result.sentences.extend(split.sentences)
    return result
