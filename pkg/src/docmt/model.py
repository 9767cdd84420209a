"""A compact pre-norm encoder-decoder transformer built on the autodiff tape.

The source-language signal is an embedding added to every source word
embedding (never an extra sequence position):

    input(t) = tok_emb[id_t] * sqrt(d_model) + pos_enc(t) + lang_emb[lang]

Source and target share one token embedding, which is also the output
projection.  Positional encodings run continuously across SEN boundaries
inside concatenated chunks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from .d2d import TrainingExample
from .errors import ConfigError
from .tokenizer import FIRST_LANG_ID, PAD_ID

NEG_INF = -1.0e9  # additive mask value; large but finite so float32 stays NaN-free


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    languages: tuple[str, ...]
    layers: int = 2
    heads: int = 4
    d_model: int = 64
    d_ff: int = 256
    dropout_residual: float = 0.1
    dropout_attention: float = 0.1
    label_smoothing: float = 0.1
    max_positions: int = 512

    def __post_init__(self) -> None:
        object.__setattr__(self, "languages", tuple(self.languages))
        if self.vocab_size < FIRST_LANG_ID + len(self.languages):
            raise ConfigError(f"vocab_size {self.vocab_size} cannot hold the special tokens")
        if not self.languages:
            raise ConfigError("languages must be non-empty")
        for name in ("layers", "heads", "d_model", "d_ff", "max_positions"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.d_model % self.heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        for name in ("dropout_residual", "dropout_attention"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {getattr(self, name)}")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigError(f"label_smoothing must lie in [0, 1), got {self.label_smoothing}")

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "languages": list(self.languages),
            "layers": self.layers,
            "heads": self.heads,
            "d_model": self.d_model,
            "d_ff": self.d_ff,
            "dropout_residual": self.dropout_residual,
            "dropout_attention": self.dropout_attention,
            "label_smoothing": self.label_smoothing,
            "max_positions": self.max_positions,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        data = dict(data)
        data["languages"] = tuple(data["languages"])
        return cls(**data)

    def lang_index(self, lang: str | int) -> int:
        if isinstance(lang, str):
            try:
                return self.languages.index(lang)
            except ValueError:
                raise ConfigError(f"unknown language {lang!r}; have {self.languages}") from None
        if not 0 <= lang < len(self.languages):
            raise ConfigError(f"language index {lang} out of range")
        return int(lang)


def desk_config(vocab_size: int, languages, **overrides) -> ModelConfig:
    """Defaults small enough to train on a laptop in minutes."""
    return ModelConfig(vocab_size=vocab_size, languages=tuple(languages), **overrides)


def full_config(vocab_size: int, languages, **overrides) -> ModelConfig:
    """Reference full-scale shape (kept for manifests; far too slow to train here)."""
    values = dict(layers=6, heads=8, d_model=512, d_ff=2048,
                  dropout_residual=0.5, dropout_attention=0.2, max_positions=512)
    values.update(overrides)
    return ModelConfig(vocab_size=vocab_size, languages=tuple(languages), **values)


@dataclass
class ModelParams:
    """Named weight tensors plus the config that shaped them."""

    config: ModelConfig
    tensors: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.config, {k: v.astype(dtype) for k, v in self.tensors.items()})

    @property
    def dtype(self):
        return self.tensors["tok_emb"].dtype


def _glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in, fan_out = shape[0], shape[-1]
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float32)


def _attn_tensors(rng, prefix: str, d: int, out: dict[str, np.ndarray]) -> None:
    for name in ("wq", "wk", "wv", "wo"):
        out[f"{prefix}.{name}"] = _glorot(rng, (d, d))
    for name in ("bq", "bk", "bv", "bo"):
        out[f"{prefix}.{name}"] = np.zeros(d, dtype=np.float32)


def _ln_tensors(prefix: str, d: int, out: dict[str, np.ndarray]) -> None:
    out[f"{prefix}.g"] = np.ones(d, dtype=np.float32)
    out[f"{prefix}.b"] = np.zeros(d, dtype=np.float32)


def _ffn_tensors(rng, prefix: str, d: int, f: int, out: dict[str, np.ndarray]) -> None:
    out[f"{prefix}.w1"] = _glorot(rng, (d, f))
    out[f"{prefix}.b1"] = np.zeros(f, dtype=np.float32)
    out[f"{prefix}.w2"] = _glorot(rng, (f, d))
    out[f"{prefix}.b2"] = np.zeros(d, dtype=np.float32)


def init_model(config: ModelConfig, seed: int) -> ModelParams:
    """Glorot-uniform weights, zero biases, zero language embeddings."""
    rng = np.random.default_rng(seed)
    d, f = config.d_model, config.d_ff
    tensors: dict[str, np.ndarray] = {}
    tensors["tok_emb"] = _glorot(rng, (config.vocab_size, d))
    tensors["lang_emb"] = np.zeros((len(config.languages), d), dtype=np.float32)
    for i in range(config.layers):
        _ln_tensors(f"enc{i}.ln1", d, tensors)
        _attn_tensors(rng, f"enc{i}.attn", d, tensors)
        _ln_tensors(f"enc{i}.ln2", d, tensors)
        _ffn_tensors(rng, f"enc{i}.ffn", d, f, tensors)
    _ln_tensors("enc.ln", d, tensors)
    for i in range(config.layers):
        _ln_tensors(f"dec{i}.ln1", d, tensors)
        _attn_tensors(rng, f"dec{i}.self", d, tensors)
        _ln_tensors(f"dec{i}.ln2", d, tensors)
        _attn_tensors(rng, f"dec{i}.cross", d, tensors)
        _ln_tensors(f"dec{i}.ln3", d, tensors)
        _ffn_tensors(rng, f"dec{i}.ffn", d, f, tensors)
    _ln_tensors("dec.ln", d, tensors)
    return ModelParams(config=config, tensors=tensors)


@lru_cache(maxsize=8)
def _position_table(max_len: int, d_model: int, dtype_name: str) -> np.ndarray:
    positions = np.arange(max_len, dtype=np.float64)[:, None]
    dims = np.arange(d_model, dtype=np.float64)[None, :]
    angles = positions / np.power(10000.0, 2.0 * (dims // 2) / d_model)
    table = np.where(dims % 2 == 0, np.sin(angles), np.cos(angles))
    return table.astype(dtype_name)


def position_encoding(length: int, d_model: int, dtype=np.float32) -> np.ndarray:
    """Sinusoidal position table rows 0..length-1."""
    return _position_table(length, d_model, np.dtype(dtype).name)


@dataclass
class Batch:
    src: np.ndarray  # (B, S) int64, right-padded with PAD
    tgt_in: np.ndarray  # (B, T) int64
    tgt_out: np.ndarray  # (B, T) int64
    src_mask: np.ndarray  # (B, S) bool, True on real tokens
    tgt_mask: np.ndarray  # (B, T) bool
    lang: np.ndarray  # (B,) int64 language indices
    is_document: np.ndarray  # (B,) bool


def build_batch(examples: list[TrainingExample]) -> Batch:
    """Right-pad a list of examples into rectangular id arrays."""
    if not examples:
        raise ConfigError("cannot batch zero examples")
    B = len(examples)
    S = max(len(ex.src_ids) for ex in examples)
    T = max(len(ex.tgt_ids) for ex in examples) - 1
    src = np.full((B, S), PAD_ID, dtype=np.int64)
    tgt_in = np.full((B, T), PAD_ID, dtype=np.int64)
    tgt_out = np.full((B, T), PAD_ID, dtype=np.int64)
    src_mask = np.zeros((B, S), dtype=bool)
    tgt_mask = np.zeros((B, T), dtype=bool)
    lang = np.zeros(B, dtype=np.int64)
    is_document = np.zeros(B, dtype=bool)
    for b, ex in enumerate(examples):
        n_src, n_tgt = len(ex.src_ids), len(ex.tgt_ids) - 1
        src[b, :n_src] = ex.src_ids
        src_mask[b, :n_src] = True
        tgt_in[b, :n_tgt] = ex.tgt_ids[:-1]
        tgt_out[b, :n_tgt] = ex.tgt_ids[1:]
        tgt_mask[b, :n_tgt] = True
        lang[b] = ex.lang_id - FIRST_LANG_ID
        is_document[b] = ex.is_document
    return Batch(src=src, tgt_in=tgt_in, tgt_out=tgt_out, src_mask=src_mask,
                 tgt_mask=tgt_mask, lang=lang, is_document=is_document)


@dataclass
class ForwardResult:
    logits: np.ndarray  # (B, T, V)
    loss: float
    per_example: np.ndarray  # (B,) mean loss over each example's real tokens
    token_count: int
    attention: list[np.ndarray] = field(default_factory=list)


def _dropout(x: ad.Tensor, rate: float, rng, train: bool) -> ad.Tensor:
    if not train or rate <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.dtype)
    return ad.mul(x, keep / np.asarray(1.0 - rate, dtype=x.dtype))


def _linear(x: ad.Tensor, w: ad.Tensor, b: ad.Tensor) -> ad.Tensor:
    return ad.add(ad.matmul(x, w), b)


def _attention(leaves, prefix: str, q_in: ad.Tensor, kv_in: ad.Tensor, mask_add: np.ndarray,
               heads: int, drop: float, rng, train: bool, sink: list | None) -> ad.Tensor:
    B, Lq, d = q_in.shape
    Lk = kv_in.shape[1]
    dh = d // heads
    q = _linear(q_in, leaves[f"{prefix}.wq"], leaves[f"{prefix}.bq"])
    k = _linear(kv_in, leaves[f"{prefix}.wk"], leaves[f"{prefix}.bk"])
    v = _linear(kv_in, leaves[f"{prefix}.wv"], leaves[f"{prefix}.bv"])
    q4 = ad.transpose(ad.reshape(q, (B, Lq, heads, dh)), (0, 2, 1, 3))
    k4 = ad.transpose(ad.reshape(k, (B, Lk, heads, dh)), (0, 2, 3, 1))
    v4 = ad.transpose(ad.reshape(v, (B, Lk, heads, dh)), (0, 2, 1, 3))
    scores = ad.mul(ad.matmul(q4, k4), 1.0 / math.sqrt(dh))
    scores = ad.add(scores, ad.const(mask_add))
    probs = ad.softmax_last(scores)
    if sink is not None:
        sink.append(probs.data)
    probs = _dropout(probs, drop, rng, train)
    ctx = ad.matmul(probs, v4)  # (B, H, Lq, dh)
    ctx = ad.reshape(ad.transpose(ctx, (0, 2, 1, 3)), (B, Lq, d))
    return _linear(ctx, leaves[f"{prefix}.wo"], leaves[f"{prefix}.bo"])


def _ffn(leaves, prefix: str, x: ad.Tensor) -> ad.Tensor:
    h = ad.relu(_linear(x, leaves[f"{prefix}.w1"], leaves[f"{prefix}.b1"]))
    return _linear(h, leaves[f"{prefix}.w2"], leaves[f"{prefix}.b2"])


def _ln(leaves, prefix: str, x: ad.Tensor) -> ad.Tensor:
    return ad.layer_norm(x, leaves[f"{prefix}.g"], leaves[f"{prefix}.b"])


def _check_batch(config: ModelConfig, batch: Batch) -> None:
    for name, arr in (("src", batch.src), ("tgt_in", batch.tgt_in), ("tgt_out", batch.tgt_out)):
        if arr.min() < 0 or arr.max() >= config.vocab_size:
            raise ConfigError(f"{name} ids outside [0, {config.vocab_size})")
    if batch.lang.min() < 0 or batch.lang.max() >= len(config.languages):
        raise ConfigError("language index outside the configured language list")
    for name, length in (("source", batch.src.shape[1]), ("target", batch.tgt_in.shape[1])):
        if length > config.max_positions:
            raise ConfigError(
                f"{name} length {length} exceeds max_positions {config.max_positions}"
            )


def _build_graph(params: ModelParams, batch: Batch, train: bool, rng,
                 collect_attention: bool):
    """Forward pass on the tape; returns (loss, logits, leaves, attention, token_count)."""
    config = params.config
    _check_batch(config, batch)
    dtype = params.dtype
    leaves = {name: ad.param(arr) for name, arr in params.tensors.items()}
    B, S = batch.src.shape
    T = batch.tgt_in.shape[1]
    d = config.d_model
    scale = math.sqrt(d)
    sink: list | None = [] if collect_attention else None

    src_key_mask = np.where(batch.src_mask, 0.0, NEG_INF).astype(dtype)[:, None, None, :]
    causal = np.triu(np.full((T, T), NEG_INF, dtype=dtype), k=1)[None, None, :, :]

    pos = position_encoding(max(S, T), d, dtype)
    x = ad.mul(ad.embedding(leaves["tok_emb"], batch.src), scale)
    x = ad.add(x, ad.const(pos[:S]))
    lang_rows = ad.embedding(leaves["lang_emb"], batch.lang)  # (B, d)
    x = ad.add(x, ad.reshape(lang_rows, (B, 1, d)))
    for i in range(config.layers):
        h = _ln(leaves, f"enc{i}.ln1", x)
        attn = _attention(leaves, f"enc{i}.attn", h, h, src_key_mask,
                          config.heads, config.dropout_attention, rng, train, sink)
        x = ad.add(x, _dropout(attn, config.dropout_residual, rng, train))
        ffn = _ffn(leaves, f"enc{i}.ffn", _ln(leaves, f"enc{i}.ln2", x))
        x = ad.add(x, _dropout(ffn, config.dropout_residual, rng, train))
    enc_out = _ln(leaves, "enc.ln", x)

    y = ad.mul(ad.embedding(leaves["tok_emb"], batch.tgt_in), scale)
    y = ad.add(y, ad.const(pos[:T]))
    for i in range(config.layers):
        h = _ln(leaves, f"dec{i}.ln1", y)
        self_attn = _attention(leaves, f"dec{i}.self", h, h, causal,
                               config.heads, config.dropout_attention, rng, train, sink)
        y = ad.add(y, _dropout(self_attn, config.dropout_residual, rng, train))
        cross = _attention(leaves, f"dec{i}.cross", _ln(leaves, f"dec{i}.ln2", y),
                           enc_out, src_key_mask,
                           config.heads, config.dropout_attention, rng, train, sink)
        y = ad.add(y, _dropout(cross, config.dropout_residual, rng, train))
        ffn = _ffn(leaves, f"dec{i}.ffn", _ln(leaves, f"dec{i}.ln3", y))
        y = ad.add(y, _dropout(ffn, config.dropout_residual, rng, train))
    dec_out = _ln(leaves, "dec.ln", y)

    logits = ad.matmul(dec_out, ad.transpose(leaves["tok_emb"], (1, 0)))  # (B, T, V)
    logp = ad.log_softmax_last(logits)
    picked = ad.take_last(logp, batch.tgt_out)
    smoothing = config.label_smoothing
    per_token = ad.add(
        ad.mul(picked, -(1.0 - smoothing)),
        ad.mul(ad.sum_last(logp), -smoothing / config.vocab_size),
    )
    mask = batch.tgt_mask.astype(dtype)
    masked = ad.mul(per_token, ad.const(mask))
    token_count = int(batch.tgt_mask.sum())
    if token_count == 0:
        raise ConfigError("batch has no unmasked target tokens")
    loss = ad.mul(ad.sum_all(masked), 1.0 / token_count)
    return loss, logits, leaves, masked, sink or [], token_count


def forward(params: ModelParams, batch: Batch, train_mode: bool = False,
            rng: np.random.Generator | None = None,
            collect_attention: bool = False) -> ForwardResult:
    """Teacher-forced forward pass; no gradient tape is kept."""
    with ad.no_grad():
        loss, logits, _, masked, attention, token_count = _build_graph(
            params, batch, train_mode, rng, collect_attention
        )
    tokens_per_example = np.maximum(batch.tgt_mask.sum(axis=1), 1)
    per_example = masked.data.sum(axis=1) / tokens_per_example
    return ForwardResult(
        logits=logits.data,
        loss=float(loss.data),
        per_example=per_example,
        token_count=token_count,
        attention=attention,
    )


def backward(params: ModelParams, batch: Batch, train_mode: bool = False,
             rng: np.random.Generator | None = None) -> tuple[dict[str, np.ndarray], float]:
    """Loss gradients with respect to every named tensor."""
    loss, _, leaves, _, _, _ = _build_graph(params, batch, train_mode, rng, False)
    ad.backward(loss)
    grads = {
        name: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data))
        for name, leaf in leaves.items()
    }
    return grads, float(loss.data)


def embed_source(params: ModelParams, src_ids, lang: str | int) -> np.ndarray:
    """Source-side input embeddings for one unbatched id sequence."""
    config = params.config
    index = config.lang_index(lang)
    ids = np.asarray(src_ids, dtype=np.int64)
    d = config.d_model
    table = params.tensors["tok_emb"]
    out = table[ids] * math.sqrt(d)
    out = out + position_encoding(len(ids), d, table.dtype)[: len(ids)]
    return out + params.tensors["lang_emb"][index]


def chunk_logprobs(params: ModelParams, src_ids, tgt_ids, lang_index: int) -> np.ndarray:
    """Teacher-forced log-probabilities, shape (len(tgt_ids) - 1, vocab)."""
    src = np.asarray(src_ids, dtype=np.int64)[None, :]
    tgt = np.asarray(tgt_ids, dtype=np.int64)
    batch = Batch(
        src=src,
        tgt_in=tgt[None, :-1],
        tgt_out=tgt[None, 1:],
        src_mask=np.ones_like(src, dtype=bool),
        tgt_mask=np.ones((1, len(tgt) - 1), dtype=bool),
        lang=np.asarray([lang_index], dtype=np.int64),
        is_document=np.asarray([True]),
    )
    result = forward(params, batch)
    logits = result.logits[0].astype(np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
