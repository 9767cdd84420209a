"""Experiment manifests: strict INI files with hashable resolved values.

A manifest names every knob of an experiment.  Parsing is strict: unknown
sections or keys are errors, as are malformed values.  Resolution applies,
in order, the full-scale defaults, the named preset's overrides, the file
values, then explicit command-line overrides; the sha256 of the canonical
resolved text identifies the run everywhere outputs are written.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ManifestError

# kind -> (parser, formatter); tuples serialize space-separated
_KINDS = ("int", "float", "str", "str_tuple", "float_tuple", "int_tuple")

# Full-scale defaults; the desk preset (below) rescales them to laptop size.
SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "languages": {
        "codes": ("str_tuple", ()),
        "base": ("str", "en"),
    },
    "corpora": {
        "root": ("str", "data"),
    },
    "tokenizer": {
        "vocab_size": ("int", 32000),
    },
    "model": {
        "preset": ("str", "desk"),
        "layers": ("int", 6),
        "heads": ("int", 8),
        "d_model": ("int", 512),
        "d_ff": ("int", 2048),
        "dropout_residual": ("float", 0.5),
        "dropout_attention": ("float", 0.2),
        "label_smoothing": ("float", 0.1),
        "max_positions": ("int", 512),
    },
    "train": {
        "steps": ("int", 100000),
        "batch_size": ("int", 1280),
        "warmup": ("int", 4000),
        "beta1": ("float", 0.9),
        "beta2": ("float", 0.98),
        "epsilon": ("float", 1e-9),
        "checkpoint_interval": ("int", 0),
        "keep_last": ("int", 5),
        "seed": ("int", 1),
    },
    "finetune": {
        "steps": ("int", 100000),
        "batch_size": ("int", 1280),
        "warmup": ("int", 4000),
        "beta1": ("float", 0.9),
        "beta2": ("float", 0.98),
        "epsilon": ("float", 1e-9),
        "checkpoint_interval": ("int", 0),
        "keep_last": ("int", 5),
        "seed": ("int", 1),
        "doc_ratio": ("float", 0.3),
        "teachers": ("str_tuple", ()),
        "students": ("str_tuple", ()),
        "condition": ("str", "genuine"),
    },
    "decode": {
        "beam_size": ("int", 4),
        "alpha": ("float", 0.6),
        "chunk_size": ("int", 5),
        "max_len": ("int", 0),
    },
    "metrics": {
        "context_sentences": ("int", 1),
    },
    "grid": {
        "modes": ("str_tuple", ("n21",)),
        "p_values": ("float_tuple", (0.3,)),
        "seeds": ("int_tuple", (1,)),
        "threshold": ("int", 0),
    },
    "bt": {
        "vocab_size": ("int", 0),
        "steps": ("int", 0),
        "batch_size": ("int", 64),
        "warmup": ("int", 200),
        "seed": ("int", 0),
    },
    "synth": {
        "train_docs": ("int", 400),
        "dev_docs": ("int", 60),
        "mono_docs": ("int", 120),
        "contrastive_items": ("int", 400),
        "min_sentences": ("int", 4),
        "max_sentences": ("int", 8),
        "seed": ("int", 0),
    },
}

PRESETS: dict[str, dict[tuple[str, str], object]] = {
    "full": {},
    "desk": {
        ("tokenizer", "vocab_size"): 800,
        ("model", "layers"): 2,
        ("model", "heads"): 4,
        ("model", "d_model"): 64,
        ("model", "d_ff"): 256,
        ("model", "dropout_residual"): 0.1,
        ("model", "dropout_attention"): 0.1,
        ("train", "steps"): 2000,
        ("train", "batch_size"): 64,
        ("train", "warmup"): 400,
        ("finetune", "steps"): 1500,
        ("finetune", "batch_size"): 64,
        ("finetune", "warmup"): 400,
        ("decode", "chunk_size"): 3,
        ("synth", "train_docs"): 160,
        ("synth", "dev_docs"): 40,
        ("synth", "mono_docs"): 60,
        ("synth", "contrastive_items"): 200,
    },
}


def _parse_value(section: str, key: str, kind: str, raw: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "str":
            return raw
        if kind == "str_tuple":
            return tuple(raw.split()) if raw else ()
        if kind == "float_tuple":
            return tuple(float(x) for x in raw.split())
        if kind == "int_tuple":
            return tuple(int(x) for x in raw.split())
    except ValueError:
        raise ManifestError(
            f"[{section}] {key}: cannot parse {raw!r} as {kind}"
        ) from None
    raise ManifestError(f"unknown kind {kind!r} for [{section}] {key}")


def _format_value(kind: str, value) -> str:
    if kind in ("str_tuple", "float_tuple", "int_tuple"):
        return " ".join(repr(v) if kind == "float_tuple" else str(v) for v in value)
    if kind == "float":
        return repr(float(value))
    return str(value)


@dataclass
class Manifest:
    """Raw file content: string values only, keys already schema-checked."""

    values: dict[tuple[str, str], str] = field(default_factory=dict)
    path: str = ""


def parse_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), strict=True)
    try:
        parser.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ManifestError(f"{path}: {exc}") from None
    values: dict[tuple[str, str], str] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ManifestError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                known = ", ".join(sorted(SCHEMA[section]))
                raise ManifestError(
                    f"{path}: unknown key {key!r} in [{section}] (known: {known})"
                )
            values[(section, key)] = raw
    return Manifest(values=values, path=str(path))


def parse_override(spec: str) -> tuple[str, str, str]:
    """Split a ``section.key=value`` command-line override."""
    head, sep, value = spec.partition("=")
    section, dot, key = head.partition(".")
    if not sep or not dot or not section or not key:
        raise ManifestError(f"override must look like section.key=value, got {spec!r}")
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise ManifestError(f"override names unknown key [{section}] {key}")
    return section, key, value


@dataclass
class ResolvedManifest:
    """Every knob filled in and typed; canonical text defines the hash."""

    values: dict[tuple[str, str], object]
    audit: list[str] = field(default_factory=list)

    def get(self, section: str, key: str):
        try:
            return self.values[(section, key)]
        except KeyError:
            raise ManifestError(f"no such manifest key [{section}] {key}") from None

    def canonical_text(self) -> str:
        lines: list[str] = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            for key, (kind, _default) in keys.items():
                lines.append(f"{key} = {_format_value(kind, self.values[(section, key)])}")
            lines.append("")
        return "\n".join(lines)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()

    @property
    def short_hash(self) -> str:
        return self.hash[:12]

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.canonical_text().encode("utf-8"))


def resolve_manifest(manifest: Manifest | None = None,
                     overrides: list[str] | None = None) -> ResolvedManifest:
    values: dict[tuple[str, str], object] = {
        (section, key): default
        for section, keys in SCHEMA.items()
        for key, (_kind, default) in keys.items()
    }
    raw = manifest.values if manifest is not None else {}
    preset_name = raw.get(("model", "preset"), values[("model", "preset")]).strip()
    if preset_name not in PRESETS:
        raise ManifestError(
            f"unknown preset {preset_name!r}; expected one of {sorted(PRESETS)}"
        )
    values[("model", "preset")] = preset_name
    values.update(PRESETS[preset_name])
    audit: list[str] = []
    for (section, key), text in raw.items():
        kind = SCHEMA[section][key][0]
        values[(section, key)] = _parse_value(section, key, kind, text)
    for spec in overrides or []:
        section, key, text = parse_override(spec)
        kind = SCHEMA[section][key][0]
        values[(section, key)] = _parse_value(section, key, kind, text)
        audit.append(f"override [{section}] {key} = {text}")
    return ResolvedManifest(values=values, audit=audit)
