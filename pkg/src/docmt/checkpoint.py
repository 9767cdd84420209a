"""Byte-stable binary checkpoints.

Layout: a magic line, one JSON metadata line (sorted keys, so identical
state always serializes to identical bytes), then the named tensors as
row-major little-endian float32, parameters first, then the optimizer's
first and second moments when present.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, CorpusFormatError
from .model import ModelConfig, ModelParams

MAGIC = b"docmt-ckpt-v1\n"


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        return cls(
            m={k: np.zeros_like(t) for k, t in params.tensors.items()},
            v={k: np.zeros_like(t) for k, t in params.tensors.items()},
            step=0,
        )

    def copy(self) -> "AdamState":
        return AdamState(
            m={k: t.copy() for k, t in self.m.items()},
            v={k: t.copy() for k, t in self.v.items()},
            step=self.step,
        )


@dataclass
class Checkpoint:
    params: ModelParams
    opt: AdamState | None
    step: int

    def copy(self) -> "Checkpoint":
        return Checkpoint(
            params=self.params.copy(),
            opt=self.opt.copy() if self.opt is not None else None,
            step=self.step,
        )


def _tensor_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(ckpt.params.tensors)
    meta = {
        "config": ckpt.params.config.to_dict(),
        "step": ckpt.step,
        "tensors": [[name, list(ckpt.params.tensors[name].shape)] for name in names],
        "opt_step": None if ckpt.opt is None else ckpt.opt.step,
    }
    blob = [MAGIC, json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8"), b"\n"]
    for name in names:
        blob.append(_tensor_bytes(ckpt.params.tensors[name]))
    if ckpt.opt is not None:
        for name in names:
            blob.append(_tensor_bytes(ckpt.opt.m[name]))
        for name in names:
            blob.append(_tensor_bytes(ckpt.opt.v[name]))
    path.write_bytes(b"".join(blob))


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    data = path.read_bytes()
    if not data.startswith(MAGIC):
        raise CorpusFormatError(f"{path}: not a checkpoint file (bad magic)")
    body = data[len(MAGIC) :]
    newline = body.index(b"\n")
    meta = json.loads(body[:newline].decode("utf-8"))
    config = ModelConfig.from_dict(meta["config"])
    offset = len(MAGIC) + newline + 1

    def take(shape: list[int]) -> np.ndarray:
        nonlocal offset
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        offset += count * 4
        return arr.reshape(shape).astype(np.float32)

    tensors = {name: take(shape) for name, shape in meta["tensors"]}
    opt = None
    if meta["opt_step"] is not None:
        m = {name: take(shape) for name, shape in meta["tensors"]}
        v = {name: take(shape) for name, shape in meta["tensors"]}
        opt = AdamState(m=m, v=v, step=int(meta["opt_step"]))
    if offset != len(data):
        raise CorpusFormatError(f"{path}: {len(data) - offset} trailing bytes")
    return Checkpoint(params=ModelParams(config=config, tensors=tensors), opt=opt,
                      step=int(meta["step"]))


def average_checkpoints(checkpoints: list[Checkpoint], k: int) -> ModelParams:
    """Mean of the last ``k`` checkpoints' parameters; optimizer state is dropped."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if len(checkpoints) < k:
        raise ConfigError(f"need {k} checkpoints, have {len(checkpoints)}")
    window = sorted(checkpoints, key=lambda c: c.step)[-k:]
    first = window[0].params
    for ckpt in window[1:]:
        if ckpt.params.config.to_dict() != first.config.to_dict():
            raise ConfigError("cannot average checkpoints with different configs")
    tensors = {}
    for name in first.tensors:
        stacked = np.stack([c.params.tensors[name].astype(np.float64) for c in window])
        tensors[name] = stacked.mean(axis=0).astype(np.float32)
    return ModelParams(config=first.config, tensors=tensors)
