"""Back-translation: reverse bilingual models and pseudo parallel documents.

A reverse model translates the shared target language back into a source
language.  It gets half the main run's BPE vocabulary and half its training
steps.  Pseudo documents pair genuine target-side documents with synthesized
sources, sentence by sentence, so document structure survives exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .checkpoint import average_checkpoints
from .corpus import DocumentCorpus, ParallelDocCorpus, write_doc_corpus
from .d2d import sentence_examples
from .decode import BeamConfig, sen_infer
from .errors import ConfigError
from .model import ModelConfig, ModelParams
from .sampler import Pool, build_schedule
from .tokenizer import Vocabulary, train_bpe
from .trainer import TrainConfig, pretrain_sennmt


@dataclass(frozen=True)
class BTConfig:
    vocab_size: int
    steps: int
    batch_size: int = 64
    warmup: int = 200
    seed: int = 0
    layers: int = 2
    heads: int = 4
    d_model: int = 64
    d_ff: int = 256

    @classmethod
    def halved_from(cls, main_vocab_size: int, main_steps: int, **overrides) -> "BTConfig":
        """The standard derivation: half the vocabulary, half the steps."""
        return cls(
            vocab_size=main_vocab_size // 2,
            steps=max(1, main_steps // 2),
            **overrides,
        )


@dataclass
class ReverseModel:
    """A trained target-to-source model plus everything needed to replay it."""

    params: ModelParams
    vocab: Vocabulary
    pair: tuple[str, str]  # the MAIN direction (source language, target language)
    manifest: dict


def train_reverse_bilingual(
    sentence_pairs: ParallelDocCorpus,
    bt_config: BTConfig,
    main_vocab_size: int | None = None,
    main_steps: int | None = None,
) -> ReverseModel:
    """Train a reverse model on swapped sentence pairs.

    ``sentence_pairs`` is the main translation direction; training data is
    its target side as source and vice versa.  The optional main-run numbers
    are recorded in the manifest so the halving stays auditable.
    """
    src_lang = sentence_pairs.src.language
    tgt_lang = sentence_pairs.tgt.language
    swapped = ParallelDocCorpus(src=sentence_pairs.tgt, tgt=sentence_pairs.src)
    text = swapped.src.sentences() + swapped.tgt.sentences()
    vocab = train_bpe(text, bt_config.vocab_size, languages=(tgt_lang,))
    examples = sentence_examples(swapped, vocab)
    schedule = build_schedule(
        teachers=[],
        students=[Pool(pair=(tgt_lang, src_lang), examples=examples)],
        doc_ratio=0.0,
        seed=bt_config.seed,
    )
    model_config = ModelConfig(
        vocab_size=len(vocab),
        languages=(tgt_lang,),
        layers=bt_config.layers,
        heads=bt_config.heads,
        d_model=bt_config.d_model,
        d_ff=bt_config.d_ff,
    )
    train_config = TrainConfig(
        steps=bt_config.steps,
        batch_size=bt_config.batch_size,
        warmup=bt_config.warmup,
        seed=bt_config.seed,
    )
    result = pretrain_sennmt(schedule, model_config, train_config)
    params = average_checkpoints(result.kept, min(5, len(result.kept)))
    manifest = {
        "pair": [src_lang, tgt_lang],
        "direction": f"{tgt_lang}->{src_lang}",
        "vocab_size": len(vocab),
        "steps": bt_config.steps,
        "main_vocab_size": main_vocab_size,
        "main_steps": main_steps,
        "seed": bt_config.seed,
    }
    return ReverseModel(params=params, vocab=vocab, pair=(src_lang, tgt_lang),
                        manifest=manifest)


def back_translate_docs(
    reverse: ReverseModel,
    mono: DocumentCorpus,
    beam: BeamConfig = BeamConfig(),
) -> ParallelDocCorpus:
    """Pseudo parallel documents from genuine target-side documents.

    Every mono sentence is translated independently, so each pseudo document
    aligns one-to-one with its genuine document and the target side is the
    mono input unchanged.
    """
    src_lang, tgt_lang = reverse.pair
    if mono.language != tgt_lang:
        raise ConfigError(
            f"mono corpus language {mono.language!r} does not match target {tgt_lang!r}"
        )
    pseudo_docs: list[list[str]] = []
    for doc in mono.docs:
        result = sen_infer(reverse.params, reverse.vocab, doc, tgt_lang, beam)
        pseudo_docs.append(result.sentences)
    pseudo = DocumentCorpus(language=src_lang, docs=pseudo_docs)
    return ParallelDocCorpus(src=pseudo, tgt=mono)


def apply_replacement(
    sentence_pools: dict[tuple[str, str], Pool],
    pseudo_pools: dict[tuple[str, str], Pool],
) -> tuple[list[Pool], list[Pool]]:
    """Schedule inputs for the back-translation condition.

    Teachers come from the pseudo-document pools; sentence pools of replaced
    pairs are dropped entirely, the remaining pairs stay students.
    """
    teachers = [pseudo_pools[pair] for pair in sorted(pseudo_pools)]
    students = [
        pool for pair, pool in sorted(sentence_pools.items()) if pair not in pseudo_pools
    ]
    return teachers, students


def write_bt_corpus(
    pseudo: ParallelDocCorpus,
    out_dir: str | Path,
    manifest: dict,
) -> tuple[Path, Path]:
    """Write a pseudo pair under a ``bt/`` prefix with provenance headers."""
    out = Path(out_dir) / "bt"
    out.mkdir(parents=True, exist_ok=True)
    src_lang, tgt_lang = pseudo.src.language, pseudo.tgt.language
    stamp = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    header = f"#bt {stamp}"
    src_path = out / f"{src_lang}-{tgt_lang}.pseudo.{src_lang}.txt"
    tgt_path = out / f"{src_lang}-{tgt_lang}.pseudo.{tgt_lang}.txt"
    write_doc_corpus(pseudo.src, src_path, header=header)
    write_doc_corpus(pseudo.tgt, tgt_path, header=header)
    (out / f"{src_lang}-{tgt_lang}.manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return src_path, tgt_path
