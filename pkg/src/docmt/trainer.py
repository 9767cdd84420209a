"""Training loops: inverse-sqrt warmup schedule, Adam, checkpoint retention.

Stage one pretrains a sentence-level multilingual model; stage two starts
from its weights with a fresh optimizer and a document-mixing schedule.
Given identical seeds and schedules every run reproduces the same final
checkpoint bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import AdamState, Checkpoint, save_checkpoint
from .errors import ConfigError, NumericError
from .model import ModelConfig, ModelParams, backward, build_batch, init_model
from .sampler import MixSchedule


def lr_at(step: int, d_model: int, warmup: int) -> float:
    """Inverse-sqrt schedule with linear warmup."""
    if step < 1:
        raise ConfigError(f"step must be >= 1, got {step}")
    if warmup < 1:
        raise ConfigError(f"warmup must be >= 1, got {warmup}")
    return d_model ** -0.5 * min(step ** -0.5, step * warmup ** -1.5)


@dataclass(frozen=True)
class TrainConfig:
    steps: int
    batch_size: int = 64
    warmup: int = 400
    beta1: float = 0.9
    beta2: float = 0.98
    epsilon: float = 1e-9
    checkpoint_interval: int = 0  # 0 picks steps // 10 (at least 1)
    keep_last: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.warmup < 1:
            raise ConfigError(f"warmup must be >= 1, got {self.warmup}")
        for name in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {getattr(self, name)}")
        if self.epsilon <= 0.0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if self.checkpoint_interval < 0:
            raise ConfigError("checkpoint_interval must be >= 0")
        if self.keep_last < 1:
            raise ConfigError(f"keep_last must be >= 1, got {self.keep_last}")

    @property
    def interval(self) -> int:
        return self.checkpoint_interval or max(1, self.steps // 10)


def adam_step(
    params: ModelParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.98,
    epsilon: float = 1e-9,
) -> None:
    """One bias-corrected Adam update, in place on params and state."""
    state.step += 1
    t = state.step
    correction1 = 1.0 - beta1 ** t
    correction2 = 1.0 - beta2 ** t
    for name, tensor in params.tensors.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        tensor -= (lr * m_hat / (np.sqrt(v_hat) + epsilon)).astype(tensor.dtype)


@dataclass
class LogRow:
    step: int
    lr: float
    mean_loss: float
    doc_fraction: float

    def to_tsv(self) -> str:
        return f"{self.step}\t{self.lr:.8e}\t{self.mean_loss:.6f}\t{self.doc_fraction:.4f}"


@dataclass
class TrainResult:
    final: Checkpoint
    kept: list[Checkpoint]
    log: list[LogRow]

    def write_log(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = ["step\tlr\tmean_loss\tdoc_fraction"]
        lines.extend(row.to_tsv() for row in self.log)
        path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def train_loop(
    params: ModelParams,
    schedule: MixSchedule,
    config: TrainConfig,
    save_dir: str | Path | None = None,
) -> TrainResult:
    """Run ``config.steps`` updates on ``params`` (mutated in place)."""
    dropout_rng = np.random.default_rng(config.seed)
    opt = AdamState.zeros_like(params)
    d_model = params.config.d_model
    kept: list[Checkpoint] = []
    log: list[LogRow] = []
    interval_losses: list[float] = []
    interval_docs = 0
    interval_examples = 0
    save_dir = Path(save_dir) if save_dir is not None else None

    for step in range(1, config.steps + 1):
        batch = build_batch(schedule.next_batch(config.batch_size))
        grads, loss = backward(params, batch, train_mode=True, rng=dropout_rng)
        if not math.isfinite(loss):
            raise NumericError(f"non-finite loss {loss} at step {step}")
        lr = lr_at(step, d_model, config.warmup)
        adam_step(params, grads, opt, lr, config.beta1, config.beta2, config.epsilon)
        interval_losses.append(loss)
        interval_docs += int(batch.is_document.sum())
        interval_examples += len(batch.is_document)
        if step % config.interval == 0 or step == config.steps:
            kept.append(Checkpoint(params=params.copy(), opt=opt.copy(), step=step))
            if len(kept) > config.keep_last:
                kept.pop(0)
            log.append(
                LogRow(
                    step=step,
                    lr=lr,
                    mean_loss=float(np.mean(interval_losses)),
                    doc_fraction=interval_docs / max(1, interval_examples),
                )
            )
            interval_losses = []
            interval_docs = 0
            interval_examples = 0
            if save_dir is not None:
                save_checkpoint(kept[-1], save_dir / f"ckpt-{step:07d}.bin")
                for stale in sorted(save_dir.glob("ckpt-*.bin"))[: -config.keep_last]:
                    stale.unlink()

    result = TrainResult(final=kept[-1], kept=kept, log=log)
    if save_dir is not None:
        result.write_log(save_dir / "train_log.tsv")
    return result


def pretrain_sennmt(
    schedule: MixSchedule,
    model_config: ModelConfig,
    config: TrainConfig,
    save_dir: str | Path | None = None,
) -> TrainResult:
    """Stage one: sentence-level multilingual training from fresh weights.

    The schedule must be sentence-only: document ratio zero and no teacher
    pools at all.
    """
    if schedule.doc_ratio != 0.0:
        raise ConfigError(
            f"sentence-stage schedule must have doc_ratio 0, got {schedule.doc_ratio}"
        )
    if schedule.teachers:
        raise ConfigError("sentence-stage schedule must not carry document pools")
    params = init_model(model_config, seed=config.seed)
    return train_loop(params, schedule, config, save_dir=save_dir)


def finetune_docnmt(
    init: Checkpoint,
    schedule: MixSchedule,
    config: TrainConfig,
    model_config: ModelConfig | None = None,
    save_dir: str | Path | None = None,
) -> TrainResult:
    """Stage two: continue from a checkpoint with a fresh optimizer.

    ``model_config``, when given, must equal the checkpoint's config; the
    error lists every differing field.
    """
    have = init.params.config
    if model_config is not None and model_config.to_dict() != have.to_dict():
        want_d, have_d = model_config.to_dict(), have.to_dict()
        diffs = [
            f"{key}: checkpoint={have_d[key]!r} requested={want_d[key]!r}"
            for key in have_d
            if have_d[key] != want_d[key]
        ]
        raise ConfigError("checkpoint/config mismatch: " + "; ".join(diffs))
    params = init.params.copy()
    return train_loop(params, schedule, config, save_dir=save_dir)
