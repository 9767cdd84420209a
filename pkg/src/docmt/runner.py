"""Transfer-experiment sweeps: enumerate configurations, train, evaluate, report.

A sweep crosses transfer modes (many-to-one ``n21``, one-to-many ``12n``)
with document-proportion values and teacher/student assignments.  Every run
shares one pretrained sentence-level model per mode and seed, so the sweep
measures exactly one thing: what the document finetune adds.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .btpipe import BTConfig, back_translate_docs, train_reverse_bilingual
from .checkpoint import Checkpoint, average_checkpoints
from .corpus import DocumentCorpus, ParallelDocCorpus
from .d2d import document_examples, sentence_examples
from .decode import BeamConfig, doc_infer, sen_infer
from .errors import ConfigError
from .metrics import ContrastiveItem, contrastive_accuracy, corpus_bleu, doc_bleu, pronoun_f1
from .model import ModelConfig, ModelParams
from .sampler import Pool, build_schedule
from .tokenizer import Vocabulary, train_bpe
from .trainer import TrainConfig, finetune_docnmt, pretrain_sennmt
from .synth import SynthData

MODES = ("n21", "12n")
CONDITIONS = ("genuine", "bt")


@dataclass(frozen=True)
class RunSpec:
    """One finetune run: who has documents, who gets evaluated."""

    mode: str
    p: float
    index: int
    teachers: tuple[str, ...]
    students: tuple[str, ...]


@dataclass(frozen=True)
class ExperimentGrid:
    modes: tuple[str, ...]
    p_values: tuple[float, ...]
    pretrain: TrainConfig
    finetune: TrainConfig
    condition: str = "genuine"
    seeds: tuple[int, ...] = (1,)
    chunk_size: int = 3
    vocab_size: int = 800
    beam: BeamConfig = BeamConfig()
    context_sentences: int = 1
    keep_average: int = 5
    bt: BTConfig | None = None
    jobs: int = 1

    def __post_init__(self) -> None:
        for mode in self.modes:
            if mode not in MODES:
                raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")
        if not self.modes:
            raise ConfigError("at least one mode is required")
        if len(set(self.modes)) != len(self.modes):
            raise ConfigError(f"duplicate modes: {self.modes}")
        if not self.p_values:
            raise ConfigError("at least one document-proportion value is required")
        for p in self.p_values:
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"document proportion must lie in [0, 1], got {p}")
        if self.condition not in CONDITIONS:
            raise ConfigError(f"unknown condition {self.condition!r}; expected {CONDITIONS}")
        if self.condition == "bt" and "12n" in self.modes:
            raise ConfigError("back-translated teachers are only defined for n21 sweeps")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.keep_average < 1:
            raise ConfigError(f"keep_average must be >= 1, got {self.keep_average}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")


def enumerate_configs(languages: tuple[str, ...], grid: ExperimentGrid) -> list[RunSpec]:
    """Every (mode, p, assignment) cell of the sweep, in a fixed order.

    ``n21``: each language takes a turn as the document-less student, all
    others teach.  ``12n``: each language takes a turn as the sole teacher
    and every other direction is evaluated as a student.
    """
    if len(languages) < 2:
        raise ConfigError("transfer needs at least two languages")
    runs: list[RunSpec] = []
    index = 0
    for mode in grid.modes:
        for p in grid.p_values:
            for lang in languages:
                others = tuple(l for l in languages if l != lang)
                if mode == "n21":
                    teachers, students = others, (lang,)
                else:
                    teachers, students = (lang,), others
                runs.append(RunSpec(mode=mode, p=p, index=index,
                                    teachers=teachers, students=students))
                index += 1
    return runs


@dataclass(frozen=True)
class DirectionRow:
    """One evaluated direction of one run, in long format (one metric each)."""

    seed: int
    mode: str
    condition: str
    stage: str  # "baseline" or "doc"
    p: float
    run: int
    teachers: tuple[str, ...]
    direction: str  # the cipher language of the evaluated pair
    teacher_sentences: int
    student_sentences: int
    metric: str
    value: float


@dataclass(frozen=True)
class SummaryRow:
    mode: str
    condition: str
    stage: str
    p: float
    metric: str
    mean: float
    std: float
    n: int


@dataclass
class SweepReport:
    rows: list[DirectionRow]
    summary: list[SummaryRow] = field(default_factory=list)
    manifest_hash: str = ""

    def __post_init__(self) -> None:
        if not self.summary:
            self.summary = summarize(self.rows)


def summarize(rows: list[DirectionRow]) -> list[SummaryRow]:
    """Aggregate direction rows into per-cell means.

    Directions inside one run are averaged first, so a one-to-many run with
    many student directions counts once, the same as a many-to-one run.
    """
    runs: dict[tuple, list[float]] = {}
    for row in rows:
        key = (row.mode, row.condition, row.stage, row.p, row.metric, row.seed, row.run)
        runs.setdefault(key, []).append(row.value)
    cells: dict[tuple, list[float]] = {}
    for (mode, condition, stage, p, metric, _seed, _run), values in runs.items():
        cells.setdefault((mode, condition, stage, p, metric), []).append(
            math.fsum(values) / len(values)
        )
    out: list[SummaryRow] = []
    for key in sorted(cells):
        values = cells[key]
        mean = math.fsum(values) / len(values)
        var = math.fsum((v - mean) ** 2 for v in values) / len(values)
        mode, condition, stage, p, metric = key
        out.append(SummaryRow(mode=mode, condition=condition, stage=stage, p=p,
                              metric=metric, mean=mean, std=math.sqrt(var), n=len(values)))
    return out


def group_by_resource(rows: list[DirectionRow], threshold: int,
                      metric: str) -> dict[str, float]:
    """Mean metric split by teacher- and student-side data size.

    ``teacher_high`` holds directions whose teachers together contributed
    more than ``threshold`` sentences; ``student_high`` splits on the
    evaluated direction's own sentence-pool size.
    """
    groups: dict[str, list[float]] = {}
    for row in rows:
        if row.metric != metric or row.stage != "doc":
            continue
        teacher_side = "teacher_high" if row.teacher_sentences > threshold else "teacher_low"
        student_side = "student_high" if row.student_sentences > threshold else "student_low"
        groups.setdefault(teacher_side, []).append(row.value)
        groups.setdefault(student_side, []).append(row.value)
    return {name: math.fsum(vals) / len(vals) for name, vals in sorted(groups.items())}


@dataclass
class _SeedAssets:
    """Everything built once per (seed, mode) and shared across runs."""

    vocab: Vocabulary
    model_config: ModelConfig
    sen_params: ModelParams
    doc_pools: dict[str, Pool]
    sen_pools: dict[str, Pool]
    eval_pairs: dict[str, ParallelDocCorpus]
    items: dict[str, list[ContrastiveItem]]


def _finetune_seed(sweep_seed: int, run_index: int) -> int:
    return (sweep_seed * 1009 + run_index * 13 + 1) % (2 ** 31 - 1)


def _direction_metrics(params: ModelParams, vocab: Vocabulary,
                       dev: ParallelDocCorpus, items: list[ContrastiveItem],
                       lang: str, grid: ExperimentGrid) -> dict[str, float]:
    """Decode the dev set both ways and score everything that is defined."""
    doc_hyps: list[list[str]] = []
    sen_hyps: list[list[str]] = []
    mismatched = 0
    forced = 0
    chunks = 0
    for doc in dev.src.docs:
        doc_result = doc_infer(params, vocab, doc, lang, grid.chunk_size, grid.beam)
        sen_result = sen_infer(params, vocab, doc, lang, grid.beam)
        doc_hyps.append(doc_result.sentences)
        sen_hyps.append(sen_result.sentences)
        mismatched += doc_result.mismatched_chunks
        forced += doc_result.forced_stops + sen_result.forced_stops
        chunks += doc_result.chunks
    refs = dev.tgt.docs
    metrics: dict[str, float] = {}
    metrics["doc_bleu_doc"] = _doc_bleu_ragged(doc_hyps, refs, dev.tgt.language)
    metrics["doc_bleu_sen"] = _doc_bleu_ragged(sen_hyps, refs, dev.tgt.language)
    metrics["bleu_sen"] = corpus_bleu(
        [s for doc in sen_hyps for s in doc], [s for doc in refs for s in doc]
    )
    aligned_hyp: list[str] = []
    aligned_ref: list[str] = []
    aligned_docs = 0
    for hyp_doc, ref_doc in zip(doc_hyps, refs):
        if len(hyp_doc) == len(ref_doc):
            aligned_docs += 1
            aligned_hyp.extend(hyp_doc)
            aligned_ref.extend(ref_doc)
    metrics["count_match"] = aligned_docs / len(refs) if refs else 1.0
    metrics["forced_stop_rate"] = forced / max(1, chunks + dev.src.num_sentences)
    if dev.tgt.language not in vocab.languages:
        # target side is the shared language: pronoun surface forms exist
        metrics["pronoun_f1_doc"] = (
            pronoun_f1(aligned_hyp, aligned_ref).f1 if aligned_hyp else 0.0
        )
        metrics["pronoun_f1_sen"] = pronoun_f1(
            [s for doc in sen_hyps for s in doc], [s for doc in refs for s in doc]
        ).f1
        if items:
            metrics["contrastive"] = contrastive_accuracy(
                params, vocab, items, lang, context_size=grid.context_sentences
            )
    return metrics


def _doc_bleu_ragged(hyp_docs: list[list[str]], ref_docs, language: str) -> float:
    """doc-BLEU that tolerates empty hypothesis documents from bad decodes."""
    hyp_corpus = DocumentCorpus(
        language=language, docs=[doc if doc else ["[UNK]"] for doc in hyp_docs]
    )
    ref_corpus = DocumentCorpus(language=language, docs=[list(d) for d in ref_docs])
    return doc_bleu(hyp_corpus, ref_corpus)


def _build_assets(data: SynthData, grid: ExperimentGrid, mode: str, seed: int,
                  vocab: Vocabulary, pseudo: dict[str, ParallelDocCorpus]) -> _SeedAssets:
    model_config = ModelConfig(vocab_size=len(vocab), languages=vocab.languages)
    doc_pools: dict[str, Pool] = {}
    sen_pools: dict[str, Pool] = {}
    eval_pairs: dict[str, ParallelDocCorpus] = {}
    items: dict[str, list[ContrastiveItem]] = {}
    for lang in data.languages:
        pair = data.pairs[lang]
        if mode == "n21":
            train = pair.train if grid.condition == "genuine" else None
            doc_source = train if train is not None else pseudo[lang]
            doc_pools[lang] = Pool((lang, data.base),
                                   document_examples(doc_source, vocab, grid.chunk_size))
            sen_pools[lang] = Pool((lang, data.base), sentence_examples(pair.train, vocab))
            eval_pairs[lang] = pair.dev
            items[lang] = pair.contrastive
        else:
            reversed_train = ParallelDocCorpus(src=pair.train.tgt, tgt=pair.train.src)
            doc_pools[lang] = Pool(
                (data.base, lang),
                document_examples(reversed_train, vocab, grid.chunk_size, lang=lang),
            )
            sen_pools[lang] = Pool(
                (data.base, lang), sentence_examples(reversed_train, vocab, lang=lang)
            )
            eval_pairs[lang] = ParallelDocCorpus(src=pair.dev.tgt, tgt=pair.dev.src)
            items[lang] = []
    pretrain_cfg = replace(grid.pretrain, seed=seed)
    schedule = build_schedule([], [sen_pools[l] for l in data.languages], 0.0, seed)
    result = pretrain_sennmt(schedule, model_config, pretrain_cfg)
    sen_params = average_checkpoints(result.kept, min(grid.keep_average, len(result.kept)))
    return _SeedAssets(vocab=vocab, model_config=model_config, sen_params=sen_params,
                       doc_pools=doc_pools, sen_pools=sen_pools,
                       eval_pairs=eval_pairs, items=items)


def _run_payload(payload) -> list[DirectionRow]:
    """Finetune one run and evaluate its student directions (worker-safe)."""
    grid, spec, seed, assets = payload
    teacher_pools = [assets.doc_pools[t] for t in spec.teachers]
    student_pools = [assets.sen_pools[s] for s in spec.students]
    run_seed = _finetune_seed(seed, spec.index)
    schedule = build_schedule(teacher_pools, student_pools, spec.p, run_seed)
    finetune_cfg = replace(grid.finetune, seed=run_seed)
    init = Checkpoint(params=assets.sen_params.copy(), opt=None, step=0)
    result = finetune_docnmt(init, schedule, finetune_cfg,
                             model_config=assets.model_config)
    params = average_checkpoints(result.kept, min(grid.keep_average, len(result.kept)))
    teacher_sentences = sum(assets.doc_pools[t].sentence_count for t in spec.teachers)
    rows: list[DirectionRow] = []
    for lang in spec.students:
        metrics = _direction_metrics(params, assets.vocab, assets.eval_pairs[lang],
                                     assets.items[lang], lang, grid)
        for name in sorted(metrics):
            rows.append(DirectionRow(
                seed=seed, mode=spec.mode, condition=grid.condition, stage="doc",
                p=spec.p, run=spec.index, teachers=spec.teachers, direction=lang,
                teacher_sentences=teacher_sentences,
                student_sentences=assets.sen_pools[lang].sentence_count,
                metric=name, value=metrics[name],
            ))
    return rows


def run_sweep(data: SynthData, grid: ExperimentGrid,
              manifest_hash: str = "") -> SweepReport:
    """Train and evaluate every cell of the grid; fully deterministic."""
    all_runs = enumerate_configs(data.languages, grid)
    rows: list[DirectionRow] = []
    for seed in grid.seeds:
        vocab = train_bpe(data.all_training_text(), grid.vocab_size,
                          languages=data.languages)
        pseudo: dict[str, ParallelDocCorpus] = {}
        if grid.condition == "bt":
            pseudo = _pseudo_pairs(data, grid, seed)
        assets_by_mode = {
            mode: _build_assets(data, grid, mode, seed, vocab, pseudo)
            for mode in grid.modes
        }
        for mode in grid.modes:
            rows.extend(_baseline_rows(data, grid, seed, assets_by_mode[mode], mode))
        payloads = [(grid, spec, seed, assets_by_mode[spec.mode]) for spec in all_runs]
        if grid.jobs > 1:
            with ProcessPoolExecutor(max_workers=grid.jobs) as pool:
                for result in pool.map(_run_payload, payloads):
                    rows.extend(result)
        else:
            for payload in payloads:
                rows.extend(_run_payload(payload))
    rows.sort(key=lambda r: (r.seed, r.mode, r.condition, r.stage, r.p, r.run,
                             r.direction, r.metric))
    return SweepReport(rows=rows, manifest_hash=manifest_hash)


def _baseline_rows(data: SynthData, grid: ExperimentGrid, seed: int,
                   assets: _SeedAssets, mode: str) -> list[DirectionRow]:
    rows: list[DirectionRow] = []
    for lang in data.languages:
        metrics = _direction_metrics(assets.sen_params, assets.vocab,
                                     assets.eval_pairs[lang], assets.items[lang],
                                     lang, grid)
        for name in sorted(metrics):
            rows.append(DirectionRow(
                seed=seed, mode=mode, condition=grid.condition, stage="baseline",
                p=0.0, run=-1, teachers=(), direction=lang,
                teacher_sentences=0,
                student_sentences=assets.sen_pools[lang].sentence_count,
                metric=name, value=metrics[name],
            ))
    return rows


def _pseudo_pairs(data: SynthData, grid: ExperimentGrid,
                  seed: int) -> dict[str, ParallelDocCorpus]:
    """One reverse model and pseudo-document corpus per potential teacher."""
    bt_config = grid.bt or BTConfig.halved_from(
        grid.vocab_size, grid.finetune.steps, seed=seed
    )
    pseudo: dict[str, ParallelDocCorpus] = {}
    for lang in data.languages:
        pair = data.pairs[lang]
        reverse = train_reverse_bilingual(pair.train, bt_config,
                                          main_vocab_size=grid.vocab_size,
                                          main_steps=grid.finetune.steps)
        pseudo[lang] = back_translate_docs(reverse, pair.mono, grid.beam)
    return pseudo


_DIRECTION_HEADER = ("seed", "mode", "condition", "stage", "p", "run", "teachers",
                     "direction", "teacher_sentences", "student_sentences",
                     "metric", "value")
_SUMMARY_HEADER = ("mode", "condition", "stage", "p", "metric", "mean", "std", "n")


def directions_tsv(report: SweepReport) -> str:
    lines = []
    if report.manifest_hash:
        lines.append(f"# manifest\t{report.manifest_hash}")
    lines.append("\t".join(_DIRECTION_HEADER))
    for r in report.rows:
        lines.append("\t".join((
            str(r.seed), r.mode, r.condition, r.stage, f"{r.p:.4f}", str(r.run),
            "+".join(r.teachers) or "-", r.direction, str(r.teacher_sentences),
            str(r.student_sentences), r.metric, f"{r.value:.6f}",
        )))
    return "\n".join(lines) + "\n"


def summary_tsv(report: SweepReport) -> str:
    lines = []
    if report.manifest_hash:
        lines.append(f"# manifest\t{report.manifest_hash}")
    lines.append("\t".join(_SUMMARY_HEADER))
    for r in report.summary:
        lines.append("\t".join((
            r.mode, r.condition, r.stage, f"{r.p:.4f}", r.metric,
            f"{r.mean:.6f}", f"{r.std:.6f}", str(r.n),
        )))
    return "\n".join(lines) + "\n"


def read_summary_tsv(path: str | Path) -> list[SummaryRow]:
    """Parse a summary file written by ``summary_tsv`` (comments skipped)."""
    rows: list[SummaryRow] = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    body = [l for l in lines if l and not l.startswith("#")]
    if not body or tuple(body[0].split("\t")) != _SUMMARY_HEADER:
        raise ConfigError(f"{path}: not a sweep summary file")
    for line in body[1:]:
        cols = line.split("\t")
        if len(cols) != len(_SUMMARY_HEADER):
            raise ConfigError(f"{path}: malformed row {line!r}")
        rows.append(SummaryRow(mode=cols[0], condition=cols[1], stage=cols[2],
                               p=float(cols[3]), metric=cols[4], mean=float(cols[5]),
                               std=float(cols[6]), n=int(cols[7])))
    return rows


def write_sweep_report(report: SweepReport, out_dir: str | Path,
                       figures: bool = True) -> dict[str, Path]:
    """Write the delimited reports, and figures next to them."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "directions": out / "directions.tsv",
        "summary": out / "summary.tsv",
    }
    paths["directions"].write_bytes(directions_tsv(report).encode("utf-8"))
    paths["summary"].write_bytes(summary_tsv(report).encode("utf-8"))
    if figures:
        from .plots import render_summary_figures

        for name, path in render_summary_figures(report.summary, out).items():
            paths[f"figure_{name}"] = path
    return paths
