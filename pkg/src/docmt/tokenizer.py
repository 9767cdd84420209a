"""Subword vocabulary: byte-pair encoding over word types.

Text is normalized by collapsing whitespace runs to single spaces and
trimming.  Each space is then attached to the following word as a leading
meta-space symbol, so a sentence becomes a sequence of word variants
(``"a b"`` -> ``"a"``, ``"▁b"``) and BPE merges never cross word
boundaries.  Decoding concatenates pieces and maps the meta-space back to a
space, which makes encode/decode an exact roundtrip on normalized text made
of known characters.

Ids 0..4 are fixed specials (PAD, UNK, BOS, EOS, SEN) followed by one token
per language; base characters and learned merges fill the rest.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import VocabError

PAD_ID = 0
UNK_ID = 1
BOS_ID = 2
EOS_ID = 3
SEN_ID = 4
FIRST_LANG_ID = 5

META = "▁"  # leading marker on every non-initial word

_CORE_SPECIALS = ("[PAD]", "[UNK]", "[BOS]", "[EOS]", "[SEN]")
_VOCAB_FORMAT = "docmt-vocab"


def normalize(text: str) -> str:
    """Collapse whitespace runs to single spaces and trim."""
    return " ".join(text.split())


def _word_variants(text: str) -> list[str]:
    norm = normalize(text)
    if not norm:
        return []
    words = norm.split(" ")
    return [words[0]] + [META + w for w in words[1:]]


@dataclass
class Vocabulary:
    """A trained subword vocabulary: id list, merge table, language tokens."""

    languages: tuple[str, ...]
    tokens: list[str]
    merges: list[tuple[str, str]]
    _token_to_id: dict[str, int] = field(init=False, repr=False, compare=False)
    _ranks: dict[tuple[str, str], int] = field(init=False, repr=False, compare=False)
    _word_cache: dict[str, tuple[int, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.languages = tuple(self.languages)
        self.merges = [tuple(m) for m in self.merges]
        if list(self.tokens[: len(_CORE_SPECIALS)]) != list(_CORE_SPECIALS):
            raise VocabError("token table does not start with the core specials")
        if len(set(self.tokens)) != len(self.tokens):
            raise VocabError("duplicate surfaces in token table")
        self._token_to_id = {t: i for i, t in enumerate(self.tokens)}
        self._ranks = {pair: r for r, pair in enumerate(self.merges)}
        self._word_cache = {}

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def n_specials(self) -> int:
        return len(_CORE_SPECIALS) + len(self.languages)

    def is_special(self, token_id: int) -> bool:
        return 0 <= token_id < self.n_specials

    def lang_token_id(self, code: str) -> int:
        try:
            return FIRST_LANG_ID + self.languages.index(code)
        except ValueError:
            raise VocabError(f"unknown language {code!r}; have {self.languages}") from None

    def lang_index(self, code: str) -> int:
        return self.lang_token_id(code) - FIRST_LANG_ID

    def _encode_word(self, word: str) -> tuple[int, ...]:
        cached = self._word_cache.get(word)
        if cached is not None:
            return cached
        known = self._token_to_id
        # unknown characters become None sentinels; merges never cross them
        symbols: list[str | None] = [ch if ch in known else None for ch in word]
        while True:
            best_rank = None
            best_pair = None
            for a, b in zip(symbols, symbols[1:]):
                if a is None or b is None:
                    continue
                rank = self._ranks.get((a, b))
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank, best_pair = rank, (a, b)
            if best_pair is None:
                break
            a, b = best_pair
            merged: list[str | None] = []
            i = 0
            while i < len(symbols):
                if i + 1 < len(symbols) and symbols[i] == a and symbols[i + 1] == b:
                    merged.append(a + b)
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            symbols = merged
        ids = tuple(known[s] if s is not None else UNK_ID for s in symbols)
        self._word_cache[word] = ids
        return ids

    def encode(self, text: str) -> list[int]:
        """Token ids for normalized ``text``; unknown characters map to UNK."""
        ids: list[int] = []
        for word in _word_variants(text):
            ids.extend(self._encode_word(word))
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        """Inverse of encode; special ids render as their bracketed surfaces."""
        parts: list[str] = []
        n_spec = self.n_specials
        for token_id in ids:
            token_id = int(token_id)
            if not 0 <= token_id < len(self.tokens):
                raise VocabError(f"token id {token_id} out of range 0..{len(self.tokens) - 1}")
            surface = self.tokens[token_id]
            parts.append(f" {surface} " if token_id < n_spec else surface)
        return " ".join("".join(parts).replace(META, " ").split())

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "format": _VOCAB_FORMAT,
            "version": 1,
            "languages": list(self.languages),
            "tokens": self.tokens,
            "merges": [list(m) for m in self.merges],
        }
        data = json.dumps(payload, ensure_ascii=False, separators=(",", ":"))
        path.write_bytes(data.encode("utf-8"))

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != _VOCAB_FORMAT or payload.get("version") != 1:
            raise VocabError(f"{path}: not a version-1 vocabulary file")
        return cls(
            languages=tuple(payload["languages"]),
            tokens=list(payload["tokens"]),
            merges=[tuple(m) for m in payload["merges"]],
        )


def train_bpe(sentences: Iterable[str], vocab_size: int, languages: Sequence[str]) -> Vocabulary:
    """Learn a joint BPE vocabulary of exactly ``vocab_size`` entries.

    Pair frequencies are counted over word types across all sentences; ties
    break toward the lexicographically smallest pair.  A merge whose surface
    would collide with an existing token (including the bracketed specials)
    is skipped without consuming a merge slot.
    """
    languages = tuple(languages)
    if not languages:
        raise VocabError("at least one language is required")
    if len(set(languages)) != len(languages):
        raise VocabError(f"duplicate language codes: {languages}")
    specials = list(_CORE_SPECIALS) + [f"[{code}]" for code in languages]

    freqs: Counter[str] = Counter()
    for sentence in sentences:
        for word in _word_variants(sentence):
            freqs[word] += 1
    if not freqs:
        raise VocabError("training corpus contains no text")

    inventory = sorted({ch for word in freqs for ch in word} | {META})
    minimum = len(specials) + len(inventory) + 1
    if vocab_size < minimum:
        raise VocabError(
            f"vocab_size {vocab_size} too small: minimum is {minimum} "
            f"({len(specials)} specials + {len(inventory)} characters + 1 merge)"
        )
    num_merges = vocab_size - len(specials) - len(inventory)

    type_symbols = [list(word) for word in freqs]
    type_freq = list(freqs.values())
    pair_counts: Counter[tuple[str, str]] = Counter()
    pair_types: dict[tuple[str, str], set[int]] = defaultdict(set)
    for t, symbols in enumerate(type_symbols):
        f = type_freq[t]
        for pair in zip(symbols, symbols[1:]):
            pair_counts[pair] += f
            pair_types[pair].add(t)

    tokens = specials + inventory
    existing = set(tokens)
    merges: list[tuple[str, str]] = []
    banned: set[tuple[str, str]] = set()
    while len(merges) < num_merges:
        best_pair = None
        best_count = 0
        for pair, count in pair_counts.items():
            if count <= 0 or pair in banned:
                continue
            if count > best_count or (count == best_count and pair < best_pair):
                best_pair, best_count = pair, count
        if best_pair is None:
            break  # corpus exhausted: no pair left to merge
        surface = best_pair[0] + best_pair[1]
        if surface in existing:
            banned.add(best_pair)
            continue
        merges.append(best_pair)
        tokens.append(surface)
        existing.add(surface)
        a, b = best_pair
        for t in sorted(pair_types[best_pair]):
            symbols = type_symbols[t]
            f = type_freq[t]
            for pair in zip(symbols, symbols[1:]):
                pair_counts[pair] -= f
            merged: list[str] = []
            i = 0
            while i < len(symbols):
                if i + 1 < len(symbols) and symbols[i] == a and symbols[i + 1] == b:
                    merged.append(surface)
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            type_symbols[t] = merged
            for pair in zip(merged, merged[1:]):
                pair_counts[pair] += f
                pair_types[pair].add(t)

    return Vocabulary(languages=languages, tokens=tokens, merges=merges)
