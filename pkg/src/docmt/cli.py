"""Command-line entry points.

Every artifact-producing command resolves the manifest, then writes into a
run directory named by the resolved-manifest hash (plus seed where one
applies), so outputs are reproducible from (manifest, seed, corpora) and
traceable back to the exact configuration that made them.

Exit codes: 0 success, 1 validation error, 2 numeric or unexpected failure.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

from . import __version__
from .btpipe import BTConfig, back_translate_docs, train_reverse_bilingual, write_bt_corpus
from .checkpoint import Checkpoint, average_checkpoints, load_checkpoint, save_checkpoint
from .corpus import (DocumentCorpus, ParallelDocCorpus, corpus_stats, read_doc_corpus,
                     read_parallel, write_doc_corpus)
from .d2d import document_examples, read_examples, sentence_examples, write_examples
from .decode import BeamConfig, doc_infer, sen_infer
from .errors import ConfigError, ManifestError, NumericError, ValidationError
from .manifest import ResolvedManifest, parse_manifest, resolve_manifest
from .metrics import (bleu_report, contrastive_report, doc_bleu_report, pronoun_report,
                      read_contrastive, write_report)
from .model import ModelConfig
from .runner import ExperimentGrid, run_sweep, read_summary_tsv, write_sweep_report
from .sampler import Pool, build_schedule
from .synth import SynthSpec, generate, load_synth_data, write_synth_data
from .tokenizer import Vocabulary, train_bpe
from .trainer import TrainConfig, finetune_docnmt, pretrain_sennmt


def _log(run_dir: Path, message: str) -> None:
    print(message)
    with (run_dir / "run.log").open("a", encoding="utf-8") as fh:
        fh.write(message + "\n")


def _load_resolved(args) -> ResolvedManifest:
    manifest_path = Path(args.workdir) / args.manifest
    resolved = resolve_manifest(parse_manifest(manifest_path), args.set or [])
    return resolved


def _start_run(args, resolved: ResolvedManifest, name: str,
               seed: int | None = None) -> Path:
    suffix = f"-s{seed}" if seed is not None else ""
    run_dir = Path(args.workdir) / "runs" / f"{name}-{resolved.short_hash}{suffix}"
    run_dir.mkdir(parents=True, exist_ok=True)
    resolved.write(run_dir / "manifest.resolved.ini")
    (run_dir / "MANIFEST_SHA256").write_text(resolved.hash + "\n", encoding="utf-8")
    for line in resolved.audit:
        _log(run_dir, line)
    return run_dir


def _languages(resolved: ResolvedManifest) -> tuple[tuple[str, ...], str]:
    codes = resolved.get("languages", "codes")
    base = resolved.get("languages", "base")
    if not codes:
        raise ManifestError("[languages] codes is empty; list the source languages")
    if base in codes:
        raise ManifestError(f"[languages] base {base!r} also appears in codes")
    return tuple(codes), base


def _corpora_root(args, resolved: ResolvedManifest) -> Path:
    return Path(args.workdir) / resolved.get("corpora", "root")


def _prepared_dir(args) -> Path:
    return Path(args.workdir) / "prepared"


def _model_config(resolved: ResolvedManifest, vocab: Vocabulary) -> ModelConfig:
    return ModelConfig(
        vocab_size=len(vocab),
        languages=vocab.languages,
        layers=resolved.get("model", "layers"),
        heads=resolved.get("model", "heads"),
        d_model=resolved.get("model", "d_model"),
        d_ff=resolved.get("model", "d_ff"),
        dropout_residual=resolved.get("model", "dropout_residual"),
        dropout_attention=resolved.get("model", "dropout_attention"),
        label_smoothing=resolved.get("model", "label_smoothing"),
        max_positions=resolved.get("model", "max_positions"),
    )


def _train_config(resolved: ResolvedManifest, section: str) -> TrainConfig:
    return TrainConfig(
        steps=resolved.get(section, "steps"),
        batch_size=resolved.get(section, "batch_size"),
        warmup=resolved.get(section, "warmup"),
        beta1=resolved.get(section, "beta1"),
        beta2=resolved.get(section, "beta2"),
        epsilon=resolved.get(section, "epsilon"),
        checkpoint_interval=resolved.get(section, "checkpoint_interval"),
        keep_last=resolved.get(section, "keep_last"),
        seed=resolved.get(section, "seed"),
    )


def _beam_config(resolved: ResolvedManifest) -> BeamConfig:
    max_len = resolved.get("decode", "max_len")
    return BeamConfig(
        beam_size=resolved.get("decode", "beam_size"),
        alpha=resolved.get("decode", "alpha"),
        max_len=max_len if max_len > 0 else None,
    )


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise ConfigError(f"missing artifact {path} ({hint})")
    return path


def _load_vocab(args) -> Vocabulary:
    return Vocabulary.load(_require(_prepared_dir(args) / "vocab.json",
                                    "run `docmt prepare` first"))


def _load_params(args, path: str):
    ckpt = load_checkpoint(_require(Path(args.workdir) / path, "train a model first"))
    return ckpt.params


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    resolved = _load_resolved(args)
    codes, base = _languages(resolved)
    spec = SynthSpec(
        languages=codes,
        base=base,
        train_docs=resolved.get("synth", "train_docs"),
        dev_docs=resolved.get("synth", "dev_docs"),
        mono_docs=resolved.get("synth", "mono_docs"),
        contrastive_items=resolved.get("synth", "contrastive_items"),
        min_sentences=resolved.get("synth", "min_sentences"),
        max_sentences=resolved.get("synth", "max_sentences"),
        seed=resolved.get("synth", "seed"),
    )
    data = generate(spec)
    root = _corpora_root(args, resolved)
    write_synth_data(data, root)
    for lang in codes:
        pair = data.pairs[lang]
        print(f"{lang}-{base}: {pair.train.num_docs} train docs, "
              f"{pair.dev.num_docs} dev docs, {pair.mono.num_docs} mono docs, "
              f"{len(pair.contrastive)} contrastive items")
    print(f"wrote corpora under {root}")
    return 0


def _prepare_fingerprint(resolved: ResolvedManifest, files: list[Path]) -> str:
    h = hashlib.sha256()
    for key in (("languages", "codes"), ("languages", "base"),
                ("tokenizer", "vocab_size"), ("decode", "chunk_size")):
        h.update(repr(resolved.values[key]).encode("utf-8"))
    for path in files:
        h.update(str(path.name).encode("utf-8"))
        h.update(path.read_bytes())
    return h.hexdigest()


def cmd_prepare(args) -> int:
    resolved = _load_resolved(args)
    codes, base = _languages(resolved)
    root = _corpora_root(args, resolved)
    chunk_size = resolved.get("decode", "chunk_size")
    files: list[Path] = []
    for lang in codes:
        pair_dir = root / f"{lang}-{base}"
        files.append(_require(pair_dir / f"train.{lang}.txt", "run `docmt synth` or add corpora"))
        files.append(_require(pair_dir / f"train.{base}.txt", "run `docmt synth` or add corpora"))
    prepared = _prepared_dir(args)
    stamp_path = prepared / "INPUTS_SHA256"
    fingerprint = _prepare_fingerprint(resolved, files)
    if stamp_path.exists() and stamp_path.read_text(encoding="utf-8").strip() == fingerprint:
        print(f"prepared data up to date ({fingerprint[:12]})")
        return 0
    pairs = {}
    stats_lines = ["language\tdocs\tsentences\tmean_sentences_per_doc"]
    text: list[str] = []
    for lang in codes:
        pair_dir = root / f"{lang}-{base}"
        pair = read_parallel(pair_dir / f"train.{lang}.txt", pair_dir / f"train.{base}.txt",
                             lang, base)
        pairs[lang] = pair
        text.extend(pair.src.sentences())
        text.extend(pair.tgt.sentences())
        stats = corpus_stats(pair.src)
        mean = stats.num_sentences / stats.num_docs
        stats_lines.append(f"{lang}\t{stats.num_docs}\t{stats.num_sentences}\t{mean:.2f}")
    vocab = train_bpe(text, resolved.get("tokenizer", "vocab_size"), languages=codes)
    prepared.mkdir(parents=True, exist_ok=True)
    vocab.save(prepared / "vocab.json")
    (prepared / "stats.tsv").write_text("\n".join(stats_lines) + "\n", encoding="utf-8")
    for lang in codes:
        write_examples(sentence_examples(pairs[lang], vocab),
                       prepared / "cache" / f"{lang}.sen.jsonl")
        write_examples(document_examples(pairs[lang], vocab, chunk_size),
                       prepared / "cache" / f"{lang}.doc.jsonl")
    stamp_path.write_text(fingerprint + "\n", encoding="utf-8")
    print(f"prepared {len(codes)} pairs: vocab size {len(vocab)}, "
          f"chunk caches at chunk_size={chunk_size}")
    return 0


def cmd_train(args) -> int:
    resolved = _load_resolved(args)
    codes, base = _languages(resolved)
    vocab = _load_vocab(args)
    config = _train_config(resolved, "train")
    run_dir = _start_run(args, resolved, "train", seed=config.seed)
    pools = []
    for lang in codes:
        examples = read_examples(
            _require(_prepared_dir(args) / "cache" / f"{lang}.sen.jsonl",
                     "run `docmt prepare` first"))
        pools.append(Pool((lang, base), examples))
    schedule = build_schedule([], pools, 0.0, config.seed)
    _log(run_dir, f"pretraining on {len(pools)} sentence pools, {config.steps} steps")
    result = pretrain_sennmt(schedule, _model_config(resolved, vocab), config,
                             save_dir=run_dir)
    result.write_log(run_dir / "train_log.tsv")
    averaged = average_checkpoints(result.kept, min(config.keep_last, len(result.kept)))
    save_checkpoint(Checkpoint(params=averaged, opt=None, step=result.final.step),
                    run_dir / "averaged.bin")
    _log(run_dir, f"final mean loss {result.log[-1].mean_loss:.4f}; "
                  f"averaged checkpoint at {run_dir / 'averaged.bin'}")
    return 0


def _role_languages(resolved: ResolvedManifest, codes: tuple[str, ...]) -> tuple[tuple[str, ...], tuple[str, ...]]:
    teachers = resolved.get("finetune", "teachers")
    students = resolved.get("finetune", "students")
    if not teachers or not students:
        raise ManifestError(
            "[finetune] teachers and students must both be set explicitly"
        )
    for lang in (*teachers, *students):
        if lang not in codes:
            raise ManifestError(f"[finetune] role language {lang!r} not in [languages] codes")
    overlap = set(teachers) & set(students)
    if overlap:
        raise ManifestError(f"[finetune] languages in both roles: {sorted(overlap)}")
    return tuple(teachers), tuple(students)


def cmd_finetune(args) -> int:
    resolved = _load_resolved(args)
    codes, base = _languages(resolved)
    vocab = _load_vocab(args)
    config = _train_config(resolved, "finetune")
    teachers, students = _role_languages(resolved, codes)
    condition = resolved.get("finetune", "condition")
    if condition not in ("genuine", "bt"):
        raise ManifestError(f"[finetune] condition must be genuine or bt, got {condition!r}")
    run_dir = _start_run(args, resolved, "finetune", seed=config.seed)
    init_path = args.init or f"runs/train-{resolved.short_hash}-s{resolved.get('train', 'seed')}/averaged.bin"
    init = load_checkpoint(_require(Path(args.workdir) / init_path,
                                    "run `docmt train` first or pass --init"))
    chunk_size = resolved.get("decode", "chunk_size")
    teacher_pools = []
    for lang in teachers:
        if condition == "genuine":
            examples = read_examples(
                _require(_prepared_dir(args) / "cache" / f"{lang}.doc.jsonl",
                         "run `docmt prepare` first"))
        else:
            pseudo_src = _require(
                _prepared_dir(args) / "bt" / f"{lang}-{base}.pseudo.{lang}.txt",
                "run `docmt backtranslate` first")
            pseudo_tgt = _require(
                _prepared_dir(args) / "bt" / f"{lang}-{base}.pseudo.{base}.txt",
                "run `docmt backtranslate` first")
            pseudo = ParallelDocCorpus(
                src=read_doc_corpus(pseudo_src, lang, skip_header=True),
                tgt=read_doc_corpus(pseudo_tgt, base, skip_header=True),
            )
            examples = document_examples(pseudo, vocab, chunk_size)
        teacher_pools.append(Pool((lang, base), examples))
    student_pools = []
    for lang in students:
        examples = read_examples(
            _require(_prepared_dir(args) / "cache" / f"{lang}.sen.jsonl",
                     "run `docmt prepare` first"))
        student_pools.append(Pool((lang, base), examples))
    doc_ratio = resolved.get("finetune", "doc_ratio")
    schedule = build_schedule(teacher_pools, student_pools, doc_ratio, config.seed)
    _log(run_dir, f"finetuning: teachers={'+'.join(teachers)} students={'+'.join(students)} "
                  f"p={doc_ratio} condition={condition} steps={config.steps}")
    result = finetune_docnmt(init, schedule, config, save_dir=run_dir)
    result.write_log(run_dir / "train_log.tsv")
    averaged = average_checkpoints(result.kept, min(config.keep_last, len(result.kept)))
    save_checkpoint(Checkpoint(params=averaged, opt=None, step=result.final.step),
                    run_dir / "averaged.bin")
    _log(run_dir, f"final mean loss {result.log[-1].mean_loss:.4f}; "
                  f"averaged checkpoint at {run_dir / 'averaged.bin'}")
    return 0


def cmd_backtranslate(args) -> int:
    resolved = _load_resolved(args)
    codes, base = _languages(resolved)
    teachers, _students = _role_languages(resolved, codes)
    root = _corpora_root(args, resolved)
    vocab_size = resolved.get("bt", "vocab_size")
    steps = resolved.get("bt", "steps")
    main_vocab = resolved.get("tokenizer", "vocab_size")
    main_steps = resolved.get("finetune", "steps")
    bt_config = BTConfig(
        vocab_size=vocab_size or main_vocab // 2,
        steps=steps or max(1, main_steps // 2),
        batch_size=resolved.get("bt", "batch_size"),
        warmup=resolved.get("bt", "warmup"),
        seed=resolved.get("bt", "seed"),
        layers=resolved.get("model", "layers"),
        heads=resolved.get("model", "heads"),
        d_model=resolved.get("model", "d_model"),
        d_ff=resolved.get("model", "d_ff"),
    )
    run_dir = _start_run(args, resolved, "backtranslate", seed=bt_config.seed)
    beam = _beam_config(resolved)
    for lang in teachers:
        pair_dir = root / f"{lang}-{base}"
        pair = read_parallel(pair_dir / f"train.{lang}.txt", pair_dir / f"train.{base}.txt",
                             lang, base)
        mono = read_doc_corpus(_require(pair_dir / f"mono.{base}.txt",
                                        "monolingual target documents are required"), base)
        _log(run_dir, f"training reverse model {base}->{lang} "
                      f"(vocab {bt_config.vocab_size}, steps {bt_config.steps})")
        reverse = train_reverse_bilingual(pair, bt_config,
                                          main_vocab_size=main_vocab,
                                          main_steps=main_steps)
        pseudo = back_translate_docs(reverse, mono, beam)
        src_path, tgt_path = write_bt_corpus(pseudo, _prepared_dir(args), reverse.manifest)
        _log(run_dir, f"wrote pseudo pair {src_path} / {tgt_path} "
                      f"({pseudo.num_docs} docs)")
    return 0


def cmd_translate(args) -> int:
    resolved = _load_resolved(args)
    vocab = _load_vocab(args)
    params = _load_params(args, args.model)
    beam = _beam_config(resolved)
    chunk_size = resolved.get("decode", "chunk_size")
    corpus = read_doc_corpus(_require(Path(args.workdir) / args.input, "input corpus"),
                             args.lang)
    out_docs = []
    diag_lines = ["doc\texpected\tgot\tmismatched_chunks\tforced_stops\tdropped_empty"]
    mismatched = 0
    for d, doc in enumerate(corpus.docs):
        if args.mode == "doc":
            result = doc_infer(params, vocab, doc, args.lang, chunk_size, beam)
        else:
            result = sen_infer(params, vocab, doc, args.lang, beam)
        out_docs.append(result.sentences if result.sentences else ["[UNK]"])
        mismatched += int(not result.count_preserved)
        diag_lines.append(f"{d}\t{result.expected_sentences}\t{len(result.sentences)}"
                          f"\t{result.mismatched_chunks}\t{result.forced_stops}"
                          f"\t{result.dropped_empty}")
    output = Path(args.workdir) / (args.output or (args.input + ".out"))
    write_doc_corpus(DocumentCorpus(language="hyp", docs=out_docs), output)
    Path(str(output) + ".diag.tsv").write_text("\n".join(diag_lines) + "\n",
                                               encoding="utf-8")
    print(f"translated {corpus.num_docs} docs ({args.mode} mode); "
          f"{mismatched} with count mismatch; output at {output}")
    return 0


def cmd_evaluate(args) -> int:
    hyp = read_doc_corpus(Path(args.workdir) / args.hyp, "hyp")
    ref = read_doc_corpus(Path(args.workdir) / args.ref, "ref")
    out_dir = Path(args.workdir) / (args.out or "eval-report")
    reports = [
        bleu_report(hyp.sentences(), ref.sentences()),
        doc_bleu_report(hyp, ref),
        pronoun_report(hyp.sentences(), ref.sentences()),
    ]
    for report in reports:
        write_report(report, out_dir / f"{report.metric}.tsv")
        print(f"{report.metric}\t{report.value:.6f}")
    return 0


def cmd_contrastive(args) -> int:
    resolved = _load_resolved(args)
    vocab = _load_vocab(args)
    params = _load_params(args, args.model)
    items = read_contrastive(Path(args.workdir) / args.items)
    report = contrastive_report(params, vocab, items, args.lang,
                                context_size=resolved.get("metrics", "context_sentences"))
    out_dir = Path(args.workdir) / (args.out or "eval-report")
    write_report(report, out_dir / "contrastive.tsv")
    print(f"contrastive\t{report.value:.6f}\t"
          f"ci95={report.counts['ci95']:.6f}\tn={int(report.counts['items'])}")
    return 0


def cmd_sweep(args) -> int:
    resolved = _load_resolved(args)
    codes, base = _languages(resolved)
    data = load_synth_data(_corpora_root(args, resolved), codes, base)
    grid = ExperimentGrid(
        modes=resolved.get("grid", "modes"),
        p_values=resolved.get("grid", "p_values"),
        pretrain=_train_config(resolved, "train"),
        finetune=_train_config(resolved, "finetune"),
        condition=resolved.get("finetune", "condition"),
        seeds=resolved.get("grid", "seeds"),
        chunk_size=resolved.get("decode", "chunk_size"),
        vocab_size=resolved.get("tokenizer", "vocab_size"),
        beam=_beam_config(resolved),
        context_sentences=resolved.get("metrics", "context_sentences"),
        keep_average=resolved.get("train", "keep_last"),
        jobs=args.jobs,
    )
    run_dir = _start_run(args, resolved, "sweep")
    report = run_sweep(data, grid, manifest_hash=resolved.hash)
    paths = write_sweep_report(report, run_dir)
    for name in sorted(paths):
        _log(run_dir, f"{name}: {paths[name]}")
    return 0


def cmd_plot(args) -> int:
    from .plots import render_summary_figures

    rows = read_summary_tsv(Path(args.workdir) / args.summary)
    out_dir = Path(args.workdir) / (args.out or "figures")
    paths = render_summary_figures(rows, out_dir)
    for name in sorted(paths):
        print(f"{name}: {paths[name]}")
    return 0


# ---------------------------------------------------------------- wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="docmt",
        description="Desk-scale multilingual document-level NMT transfer toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, manifest: bool = True) -> None:
        p.add_argument("--workdir", default=".", help="root for all relative paths")
        if manifest:
            p.add_argument("--manifest", default="manifest.ini",
                           help="experiment manifest (INI), relative to --workdir")
            p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                           help="override a manifest value (repeatable)")

    p = sub.add_parser("synth", help="generate synthetic cipher-language corpora")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prepare", help="validate corpora, train vocabulary, cache examples")
    common(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="stage one: sentence-level multilingual pretraining")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("finetune", help="stage two: document finetune with a mixed schedule")
    common(p)
    p.add_argument("--init", help="checkpoint to start from (default: matching train run)")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("backtranslate", help="train reverse models and write pseudo documents")
    common(p)
    p.set_defaults(func=cmd_backtranslate)

    p = sub.add_parser("translate", help="decode a corpus file with a trained model")
    common(p)
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--input", required=True, help="source corpus file")
    p.add_argument("--lang", required=True, help="source language code")
    p.add_argument("--mode", choices=("sen", "doc"), default="doc")
    p.add_argument("--output", help="output corpus path (default: INPUT.out)")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("evaluate", help="score a hypothesis corpus against a reference")
    common(p, manifest=False)
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out", help="report directory (default: eval-report)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("contrastive", help="score a contrastive item file with a model")
    common(p)
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--items", required=True, help="contrastive JSONL file")
    p.add_argument("--lang", required=True, help="source language code")
    p.add_argument("--out", help="report directory (default: eval-report)")
    p.set_defaults(func=cmd_contrastive)

    p = sub.add_parser("sweep", help="run the full transfer grid and write reports + figures")
    common(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel finetune workers")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="render figures from an existing sweep summary")
    common(p, manifest=False)
    p.add_argument("--summary", required=True, help="summary.tsv from a sweep run")
    p.add_argument("--out", help="figure directory (default: figures)")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001  (CLI boundary)
        print(f"unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
