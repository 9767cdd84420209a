"""Teacher/student example mixing for the finetune stage.

Each batch slot independently draws a document example with probability
``doc_ratio`` (from one of the teacher pools, weighted by their sentence
counts) and a sentence example otherwise (from the student pools, weighted
by example counts).  All randomness flows through one seeded generator, so
a schedule replays identically for the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .d2d import TrainingExample
from .errors import ConfigError


@dataclass
class Pool:
    """A named pile of training examples for one language pair."""

    pair: tuple[str, str]
    examples: list[TrainingExample]

    @property
    def sentence_count(self) -> int:
        return sum(ex.k for ex in self.examples)

    def __len__(self) -> int:
        return len(self.examples)


@dataclass
class MixSchedule:
    teachers: list[Pool]
    students: list[Pool]
    doc_ratio: float
    seed: int
    _rng: np.random.Generator = field(init=False, repr=False)
    _teacher_weights: np.ndarray = field(init=False, repr=False)
    _teacher_sizes: np.ndarray = field(init=False, repr=False)
    _student_weights: np.ndarray = field(init=False, repr=False)
    _student_sizes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._rng = np.random.default_rng(self.seed)
        tcounts = np.array([pool.sentence_count for pool in self.teachers], dtype=np.float64)
        self._teacher_weights = tcounts / tcounts.sum() if len(tcounts) else tcounts
        self._teacher_sizes = np.array([len(pool) for pool in self.teachers], dtype=np.int64)
        scounts = np.array([len(pool) for pool in self.students], dtype=np.float64)
        self._student_weights = scounts / scounts.sum() if len(scounts) else scounts
        self._student_sizes = np.array([len(pool) for pool in self.students], dtype=np.int64)

    def teacher_weight(self, pair: tuple[str, str]) -> float:
        for pool, weight in zip(self.teachers, self._teacher_weights):
            if pool.pair == pair:
                return float(weight)
        raise ConfigError(f"no teacher pool for pair {pair}")

    def next_batch(self, batch_size: int) -> list[TrainingExample]:
        """Draw ``batch_size`` examples with replacement."""
        if batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
        is_doc = self._rng.random(batch_size) < self.doc_ratio
        out: list[TrainingExample | None] = [None] * batch_size
        doc_positions = np.flatnonzero(is_doc)
        sen_positions = np.flatnonzero(~is_doc)
        if len(doc_positions):
            pools = self._rng.choice(
                len(self.teachers), size=len(doc_positions), p=self._teacher_weights
            )
            indices = self._rng.integers(0, self._teacher_sizes[pools])
            for position, pool, index in zip(doc_positions, pools, indices):
                out[position] = self.teachers[pool].examples[index]
        if len(sen_positions):
            pools = self._rng.choice(
                len(self.students), size=len(sen_positions), p=self._student_weights
            )
            indices = self._rng.integers(0, self._student_sizes[pools])
            for position, pool, index in zip(sen_positions, pools, indices):
                out[position] = self.students[pool].examples[index]
        return out  # type: ignore[return-value]


def build_schedule(
    teachers: list[Pool],
    students: list[Pool],
    doc_ratio: float,
    seed: int,
) -> MixSchedule:
    """Validate pools and build a replayable mixing schedule."""
    if not 0.0 <= doc_ratio <= 1.0:
        raise ConfigError(f"doc_ratio must lie in [0, 1], got {doc_ratio}")
    for pool in list(teachers) + list(students):
        if not pool.examples:
            raise ConfigError(f"empty example pool for pair {pool.pair}")
    for pool in students:
        bad = sum(1 for ex in pool.examples if ex.k != 1)
        if bad:
            raise ConfigError(
                f"student pool {pool.pair} holds {bad} document examples; expected sentences only"
            )
    if doc_ratio > 0 and not teachers:
        raise ConfigError("doc_ratio > 0 requires at least one teacher pool")
    if doc_ratio < 1 and not students:
        raise ConfigError("doc_ratio < 1 requires at least one student pool")
    return MixSchedule(
        teachers=list(teachers), students=list(students), doc_ratio=doc_ratio, seed=seed
    )
