"""Synthetic many-to-one corpora for desk-scale transfer experiments.

Every source language is a deterministic letter-substitution cipher of a
small English-like base language.  The base pronouns "he" and "she" are both
mapped to one cipher word, so a source sentence starting with a pronoun is
gender-ambiguous on its own: the gender is recoverable only from the noun in
the previous sentence.  That makes document context genuinely necessary and
gives pronoun F1 and contrastive scoring something real to measure.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import DocumentCorpus, ParallelDocCorpus, write_doc_corpus
from .errors import ConfigError
from .metrics import ContrastiveItem, write_contrastive

MASCULINE = ("king", "boy", "uncle", "wizard", "actor", "father")
FEMININE = ("queen", "girl", "aunt", "witch", "actress", "mother")
OBJECTS = ("book", "lamp", "song", "stone", "letter", "garden", "door", "apple",
           "mirror", "basket")
VERBS = ("sees", "takes", "likes", "finds", "holds", "paints", "carries", "opens")

_ALPHABET = "abcdefghijklmnopqrstuvwxyz"
_PRONOUN_STEM = "pron"  # both genders collapse onto this stem before ciphering


def _child_rng(seed: int, *labels: str) -> np.random.Generator:
    entropy = [seed] + [zlib.crc32(label.encode("utf-8")) for label in labels]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def make_cipher(lang: str, seed: int) -> dict[str, str]:
    """Letter permutation for one language, keyed only by (lang, seed)."""
    rng = _child_rng(seed, "cipher", lang)
    permuted = rng.permutation(list(_ALPHABET))
    return {a: b for a, b in zip(_ALPHABET, permuted)}


def cipher_word(word: str, mapping: dict[str, str]) -> str:
    if word in ("he", "she"):
        word = _PRONOUN_STEM
    return "".join(mapping.get(ch, ch) for ch in word)


def cipher_sentence(sentence: str, mapping: dict[str, str]) -> str:
    return " ".join(cipher_word(w, mapping) for w in sentence.split(" "))


def _pick(rng: np.random.Generator, options: tuple[str, ...]) -> str:
    return options[int(rng.integers(0, len(options)))]


def _base_document(rng: np.random.Generator, min_sentences: int, max_sentences: int) -> list[str]:
    """A document of intro/pronoun/filler sentences.

    A pronoun sentence always directly follows an intro sentence whose
    subject noun fixes the pronoun's gender.
    """
    target = int(rng.integers(min_sentences, max_sentences + 1))
    sentences: list[str] = []
    while len(sentences) < target:
        roll = rng.random()
        if roll < 0.65:
            feminine = rng.random() < 0.5
            noun = _pick(rng, FEMININE if feminine else MASCULINE)
            sentences.append(f"the {noun} {_pick(rng, VERBS)} the {_pick(rng, OBJECTS)}")
            if len(sentences) < target and rng.random() < 0.85:
                pronoun = "she" if feminine else "he"
                sentences.append(f"{pronoun} {_pick(rng, VERBS)} the {_pick(rng, OBJECTS)}")
        else:
            first = _pick(rng, OBJECTS)
            second = _pick(rng, OBJECTS)
            sentences.append(f"the {first} {_pick(rng, VERBS)} the {second}")
    return sentences[:target]


def _base_corpus(rng: np.random.Generator, language: str, n_docs: int,
                 min_sentences: int, max_sentences: int) -> DocumentCorpus:
    docs = [_base_document(rng, min_sentences, max_sentences) for _ in range(n_docs)]
    return DocumentCorpus(language=language, docs=docs)


def _ciphered(base: DocumentCorpus, lang: str, mapping: dict[str, str]) -> DocumentCorpus:
    docs = [[cipher_sentence(s, mapping) for s in doc] for doc in base.docs]
    return DocumentCorpus(language=lang, docs=docs)


def swap_pronoun(sentence: str) -> str:
    """Flip a leading he/she; used to build the wrong contrastive candidate."""
    words = sentence.split(" ")
    if words[0] == "he":
        words[0] = "she"
    elif words[0] == "she":
        words[0] = "he"
    else:
        raise ConfigError(f"sentence does not start with a pronoun: {sentence!r}")
    return " ".join(words)


def _contrastive_items(rng: np.random.Generator, mapping: dict[str, str],
                       n_items: int, min_sentences: int,
                       max_sentences: int) -> list[ContrastiveItem]:
    items: list[ContrastiveItem] = []
    while len(items) < n_items:
        doc = _base_document(rng, min_sentences, max_sentences)
        for i in range(1, len(doc)):
            if len(items) >= n_items:
                break
            if doc[i].split(" ")[0] not in ("he", "she"):
                continue
            correct = doc[i]
            wrong = swap_pronoun(doc[i])
            first = int(rng.integers(0, 2))
            candidates = (correct, wrong) if first == 0 else (wrong, correct)
            items.append(
                ContrastiveItem(
                    source=cipher_sentence(doc[i], mapping),
                    context=(cipher_sentence(doc[i - 1], mapping),),
                    ref_context=(doc[i - 1],),
                    candidates=candidates,
                    correct=first,
                )
            )
    return items


@dataclass(frozen=True)
class SynthSpec:
    languages: tuple[str, ...]
    base: str = "en"
    train_docs: int = 400
    dev_docs: int = 60
    mono_docs: int = 120
    contrastive_items: int = 400
    min_sentences: int = 4
    max_sentences: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.languages:
            raise ConfigError("at least one cipher language is required")
        if self.base in self.languages:
            raise ConfigError(f"base language {self.base!r} cannot also be a cipher language")
        if self.min_sentences < 2 or self.max_sentences < self.min_sentences:
            raise ConfigError("need 2 <= min_sentences <= max_sentences")


@dataclass
class PairData:
    """Everything one language pair contributes to an experiment."""

    train: ParallelDocCorpus
    dev: ParallelDocCorpus
    mono: DocumentCorpus  # genuine target-side documents (for back-translation)
    contrastive: list[ContrastiveItem]


@dataclass
class SynthData:
    base: str
    languages: tuple[str, ...]
    pairs: dict[str, PairData] = field(default_factory=dict)

    def all_training_text(self) -> list[str]:
        text: list[str] = []
        for lang in self.languages:
            pair = self.pairs[lang]
            text.extend(pair.train.src.sentences())
            text.extend(pair.train.tgt.sentences())
        return text


def generate(spec: SynthSpec) -> SynthData:
    """Deterministic corpora for every (cipher language -> base) pair."""
    data = SynthData(base=spec.base, languages=tuple(spec.languages))
    for lang in spec.languages:
        mapping = make_cipher(lang, spec.seed)
        splits = {}
        for split, n_docs in (("train", spec.train_docs), ("dev", spec.dev_docs)):
            rng = _child_rng(spec.seed, "docs", lang, split)
            base = _base_corpus(rng, spec.base, n_docs, spec.min_sentences, spec.max_sentences)
            splits[split] = ParallelDocCorpus(src=_ciphered(base, lang, mapping), tgt=base)
        mono_rng = _child_rng(spec.seed, "mono", lang)
        mono = _base_corpus(mono_rng, spec.base, spec.mono_docs,
                            spec.min_sentences, spec.max_sentences)
        item_rng = _child_rng(spec.seed, "contrastive", lang)
        items = _contrastive_items(item_rng, mapping, spec.contrastive_items,
                                   spec.min_sentences, spec.max_sentences)
        data.pairs[lang] = PairData(train=splits["train"], dev=splits["dev"],
                                    mono=mono, contrastive=items)
    return data


def write_synth_data(data: SynthData, out_dir: str | Path) -> None:
    """Write the on-disk layout the CLI commands read back."""
    out = Path(out_dir)
    for lang in data.languages:
        pair_dir = out / f"{lang}-{data.base}"
        pair = data.pairs[lang]
        write_doc_corpus(pair.train.src, pair_dir / f"train.{lang}.txt")
        write_doc_corpus(pair.train.tgt, pair_dir / f"train.{data.base}.txt")
        write_doc_corpus(pair.dev.src, pair_dir / f"dev.{lang}.txt")
        write_doc_corpus(pair.dev.tgt, pair_dir / f"dev.{data.base}.txt")
        write_doc_corpus(pair.mono, pair_dir / f"mono.{data.base}.txt")
        write_contrastive(pair.contrastive, pair_dir / "contrastive.jsonl")


def load_synth_data(root: str | Path, languages, base: str) -> SynthData:
    """Read the layout ``write_synth_data`` produces."""
    from .corpus import read_doc_corpus
    from .metrics import read_contrastive

    root = Path(root)
    data = SynthData(base=base, languages=tuple(languages))
    for lang in data.languages:
        pair_dir = root / f"{lang}-{base}"
        if not pair_dir.is_dir():
            raise ConfigError(f"missing pair directory {pair_dir}")
        train = ParallelDocCorpus(
            src=read_doc_corpus(pair_dir / f"train.{lang}.txt", lang),
            tgt=read_doc_corpus(pair_dir / f"train.{base}.txt", base),
        )
        dev = ParallelDocCorpus(
            src=read_doc_corpus(pair_dir / f"dev.{lang}.txt", lang),
            tgt=read_doc_corpus(pair_dir / f"dev.{base}.txt", base),
        )
        mono = read_doc_corpus(pair_dir / f"mono.{base}.txt", base)
        items = read_contrastive(pair_dir / "contrastive.jsonl")
        data.pairs[lang] = PairData(train=train, dev=dev, mono=mono, contrastive=items)
    return data
