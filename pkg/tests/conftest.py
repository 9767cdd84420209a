"""Shared fixtures.

The expensive trained models are session-scoped and shared between the unit
tests and the acceptance suite, so the full run trains each stage exactly
once.  The recipe matches the documented desk-scale defaults: three cipher
languages, two of them teachers with documents, one sentence-only student.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from docmt.checkpoint import Checkpoint, average_checkpoints
from docmt.d2d import document_examples, sentence_examples
from docmt.model import ModelConfig
from docmt.sampler import Pool, build_schedule
from docmt.synth import SynthSpec, generate
from docmt.tokenizer import train_bpe
from docmt.trainer import TrainConfig, finetune_docnmt, pretrain_sennmt

TEACHERS = ("aa", "bb")
STUDENT = "zz"
LANGUAGES = TEACHERS + (STUDENT,)
BASE = "en"
CHUNK_SIZE = 3
PRETRAIN_STEPS = 2000
FINETUNE_STEPS = 3000


@pytest.fixture(scope="session")
def synth_data():
    spec = SynthSpec(languages=LANGUAGES, base=BASE, train_docs=160, dev_docs=40,
                     mono_docs=60, contrastive_items=200, seed=0)
    return generate(spec)


@pytest.fixture(scope="session")
def vocab(synth_data):
    return train_bpe(synth_data.all_training_text(), 800, languages=LANGUAGES)


@pytest.fixture(scope="session")
def sen_pools(synth_data, vocab):
    return {
        lang: Pool((lang, BASE), sentence_examples(synth_data.pairs[lang].train, vocab))
        for lang in LANGUAGES
    }


@pytest.fixture(scope="session")
def doc_pools(synth_data, vocab):
    return {
        lang: Pool((lang, BASE),
                   document_examples(synth_data.pairs[lang].train, vocab, CHUNK_SIZE))
        for lang in TEACHERS
    }


@pytest.fixture(scope="session")
def model_config(vocab):
    return ModelConfig(vocab_size=len(vocab), languages=vocab.languages)


@pytest.fixture(scope="session")
def timings():
    """Wall-clock seconds of the expensive session stages, filled in lazily."""
    return {}


@pytest.fixture(scope="session")
def sen_model(sen_pools, model_config, timings):
    """Stage one: multilingual sentence-level model, checkpoint-averaged."""
    schedule = build_schedule([], [sen_pools[l] for l in LANGUAGES], 0.0, seed=0)
    config = TrainConfig(steps=PRETRAIN_STEPS, batch_size=64, warmup=400, seed=0)
    start = time.perf_counter()
    result = pretrain_sennmt(schedule, model_config, config)
    timings["pretrain"] = time.perf_counter() - start
    return average_checkpoints(result.kept, min(5, len(result.kept)))


@pytest.fixture(scope="session")
def doc_model(sen_model, sen_pools, doc_pools, timings):
    """Stage two: teachers contribute documents, the student only sentences."""
    schedule = build_schedule([doc_pools[t] for t in TEACHERS],
                              [sen_pools[STUDENT]], 0.3, seed=1)
    config = TrainConfig(steps=FINETUNE_STEPS, batch_size=64, warmup=400, seed=1)
    init = Checkpoint(params=sen_model.copy(), opt=None, step=0)
    start = time.perf_counter()
    result = finetune_docnmt(init, schedule, config)
    timings["finetune"] = time.perf_counter() - start
    return average_checkpoints(result.kept, min(5, len(result.kept)))


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
