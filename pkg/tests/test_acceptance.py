"""Acceptance gate: one test per shipping criterion, one verdict line each.

Each test collects every sub-check of its criterion into a list of failure
strings, prints a single ``criterion N (...): PASS|FAIL`` line straight to
the terminal (bypassing capture), and only then asserts.  The expensive
trained models come from the session fixtures in conftest, so the whole
suite trains each stage exactly once; their wall-clock cost is charged
against the runtime budgets of the criteria that consume them.
"""

from __future__ import annotations

import math
import time
import zlib
from collections import Counter

import numpy as np

from conftest import BASE, CHUNK_SIZE, LANGUAGES, STUDENT, TEACHERS
from docmt.btpipe import BTConfig, back_translate_docs, train_reverse_bilingual
from docmt.checkpoint import Checkpoint, average_checkpoints
from docmt.corpus import DocumentCorpus, write_doc_corpus
from docmt.d2d import TrainingExample, chunk_document, reassemble
from docmt.decode import BeamConfig, NeuralScorer, beam_search, doc_infer, length_penalty, sen_infer
from docmt.metrics import contrastive_report, corpus_bleu, doc_bleu, pronoun_f1
from docmt.model import ModelConfig, backward, build_batch, forward, init_model
from docmt.runner import (DirectionRow, ExperimentGrid, directions_tsv, enumerate_configs,
                          run_sweep, summarize, summary_tsv)
from docmt.sampler import Pool, build_schedule
from docmt.synth import SynthSpec, generate
from docmt.tokenizer import BOS_ID, EOS_ID, FIRST_LANG_ID, PAD_ID, SEN_ID, UNK_ID
from docmt.trainer import TrainConfig

BUDGETS = {1: 60, 2: 60, 3: 120, 4: 300, 5: 1200, 6: 1800, 7: 60, 8: 600}


class Checks:
    def __init__(self) -> None:
        self.failures: list[str] = []

    def that(self, ok: bool, label: str) -> None:
        if not ok:
            self.failures.append(label)

    def close(self, got: float, want: float, tol: float, label: str) -> None:
        self.that(abs(got - want) <= tol, f"{label}: got {got!r}, want {want!r} +- {tol}")


def _verdict(capsys, num: int, name: str, body, charged: float = 0.0) -> None:
    checks = Checks()
    start = time.perf_counter()
    try:
        body(checks)
    except Exception as exc:  # a crash is a failed criterion, not a skipped line
        checks.that(False, f"raised {type(exc).__name__}: {exc}")
    elapsed = time.perf_counter() - start + charged
    checks.that(elapsed < BUDGETS[num],
                f"runtime {elapsed:.1f}s exceeds the {BUDGETS[num]}s budget")
    status = "PASS" if not checks.failures else "FAIL"
    with capsys.disabled():
        print(f"\ncriterion {num} ({name}): {status} [{elapsed:.1f}s]")
    assert not checks.failures, f"criterion {num} ({name}): " + " | ".join(checks.failures)


# ------------------------------------------------------------- criterion 1

GENDERED = frozenset({"he", "his", "him", "himself", "she", "her", "hers", "herself"})


def _pronoun_oracle(hyps, refs):
    """Independent recount: clip within each aligned pair, pool the totals."""
    matched = hyp_total = ref_total = 0
    for hyp, ref in zip(hyps, refs):
        h = Counter(w for w in hyp.split() if w in GENDERED)
        r = Counter(w for w in ref.split() if w in GENDERED)
        matched += sum(min(n, r[w]) for w, n in h.items())
        hyp_total += sum(h.values())
        ref_total += sum(r.values())
    if hyp_total == 0 and ref_total == 0:
        return (1.0, 1.0, 1.0)
    p = matched / hyp_total if hyp_total else 0.0
    r = matched / ref_total if ref_total else 0.0
    f1 = 0.0 if p + r == 0.0 else 2 * p * r / (p + r)
    return (p, r, f1)


def test_criterion_1_metric_oracles(capsys):
    def body(c: Checks) -> None:
        rng = np.random.default_rng(11)
        words = ["he", "she", "his", "her", "cat", "dog", "ran", "sat", "the", "a"]

        def segment() -> str:
            n = int(rng.integers(1, 12))
            return " ".join(words[i] for i in rng.integers(0, len(words), n))

        hyps = [segment() for _ in range(1000)]
        refs = [segment() for _ in range(1000)]
        got = pronoun_f1(hyps, refs)
        want = _pronoun_oracle(hyps, refs)
        c.that(tuple(got) == want, f"1000-pair pronoun F1 {tuple(got)} != oracle {want}")
        for _ in range(20):
            lo = int(rng.integers(0, 900))
            hi = lo + int(rng.integers(1, 101))
            sub = pronoun_f1(hyps[lo:hi], refs[lo:hi])
            c.that(tuple(sub) == _pronoun_oracle(hyps[lo:hi], refs[lo:hi]),
                   f"slice [{lo}:{hi}] disagrees with the oracle")

        # three "he" vs one: 1 clipped match out of 3 on both sides
        hand = pronoun_f1(["he he he"], ["she she he"])
        c.that(hand.precision == 1 / 3 and hand.recall == 1 / 3, f"hand P/R {hand}")
        c.close(hand.f1, 1 / 3, 1e-12, "hand F1")
        c.that(tuple(pronoun_f1(["cat"], ["dog"])) == (1.0, 1.0, 1.0),
               "pronoun-free pair must score (1, 1, 1)")

        # one wrong final token telescopes to precisions 8/9, 7/8, 6/7, 5/6
        bleu = corpus_bleu(["a b c d e f g h x"], ["a b c d e f g h y"])
        c.close(bleu, (5 / 9) ** 0.25, 1e-4, "corpus BLEU hand example")

        # the 4-gram "b c d e" only exists once sentences are joined
        hyp_doc = DocumentCorpus(language="hyp", docs=[["a b c", "d e x"]])
        ref_doc = DocumentCorpus(language="en", docs=[["a b c", "d e f"]])
        c.close(doc_bleu(hyp_doc, ref_doc), (1 / 3) ** 0.25, 1e-4,
                "doc-BLEU boundary example")

        def sentence() -> str:
            n = int(rng.integers(1, 9))
            return " ".join(words[4 + int(i)] for i in rng.integers(0, 6, n))

        sen_h = [sentence() for _ in range(150)]
        sen_r = [sentence() for _ in range(150)]
        singles_h = DocumentCorpus(language="hyp", docs=[[s] for s in sen_h])
        singles_r = DocumentCorpus(language="en", docs=[[s] for s in sen_r])
        c.close(doc_bleu(singles_h, singles_r), corpus_bleu(sen_h, sen_r), 1e-12,
                "doc-BLEU over singleton documents vs corpus BLEU")

    _verdict(capsys, 1, "metric oracles", body)


# ------------------------------------------------------------- criterion 2


def _pool_example(lang_id: int, k: int) -> TrainingExample:
    body = tuple(range(10, 10 + k))
    return TrainingExample(src_ids=body, tgt_ids=(BOS_ID, *body, EOS_ID),
                           lang_id=lang_id, k=k, truncated=False)


def test_criterion_2_pipeline_invariants(capsys):
    def body(c: Checks) -> None:
        rng = np.random.default_rng(22)
        bad = 0
        for _ in range(1000):
            doc = [f"w{int(rng.integers(0, 50))} s{j}"
                   for j in range(int(rng.integers(1, 21)))]
            for size in range(1, 9):
                chunks = chunk_document(doc, size)
                ok = (reassemble(chunks) == doc
                      and all(ch.k == size for ch in chunks[:-1])
                      and 1 <= chunks[-1].k <= size)
                bad += int(not ok)
        c.that(bad == 0, f"{bad} chunk/reassemble roundtrips failed")

        teacher_a = Pool(("aa", "en"), [_pool_example(FIRST_LANG_ID, 3)] * 60)
        teacher_b = Pool(("bb", "en"), [_pool_example(FIRST_LANG_ID + 1, 3)] * 20)
        student = Pool(("zz", "en"), [_pool_example(FIRST_LANG_ID + 2, 1)] * 30)
        expected_share = teacher_a.sentence_count / (
            teacher_a.sentence_count + teacher_b.sentence_count)
        for tenth in range(1, 10):
            p = tenth / 10
            schedule = build_schedule([teacher_a, teacher_b], [student], p, seed=tenth)
            batch = schedule.next_batch(50000)
            doc_draws = [ex for ex in batch if ex.is_document]
            fraction = len(doc_draws) / len(batch)
            c.close(fraction, p, 0.02, f"document fraction at p={p}")
            from_a = sum(ex.lang_id == FIRST_LANG_ID for ex in doc_draws)
            c.close(from_a / len(doc_draws), expected_share, 0.02,
                    f"teacher share at p={p}")

    _verdict(capsys, 2, "pipeline invariants", body)


# ------------------------------------------------------------- criterion 3

TOY = ModelConfig(vocab_size=50, languages=("aa", "en"), layers=2, heads=2,
                  d_model=16, d_ff=32, dropout_residual=0.0,
                  dropout_attention=0.0, label_smoothing=0.1, max_positions=64)


def _toy_batch():
    a = TrainingExample((10, 11, 12, 13, 14), (BOS_ID, 10, 11, 12, 13, 14, EOS_ID),
                        FIRST_LANG_ID, 1, False)
    b = TrainingExample((20, 21, 22), (BOS_ID, 20, 21, 22, EOS_ID),
                        FIRST_LANG_ID + 1, 3, False)
    return build_batch([a, b])


def _param_group(name: str) -> str:
    if name in ("tok_emb", "lang_emb"):
        return "embeddings"
    if ".ln" in name:
        return "layer_norm"
    if ".attn." in name:
        return "encoder_attention"
    if ".self." in name:
        return "decoder_self_attention"
    if ".cross." in name:
        return "decoder_cross_attention"
    if ".ffn." in name:
        return "encoder_ffn" if name.startswith("enc") else "decoder_ffn"
    raise AssertionError(f"unclassified tensor {name}")


def test_criterion_3_numerics(capsys):
    def body(c: Checks) -> None:
        params = init_model(TOY, seed=5).astype(np.float64)
        batch = _toy_batch()
        grads, loss = backward(params, batch)
        c.that(math.isfinite(loss), f"toy loss not finite: {loss}")

        groups: dict[str, list[str]] = {}
        for name in params.tensors:
            groups.setdefault(_param_group(name), []).append(name)
        rng = np.random.default_rng(33)
        eps = 1e-5
        for group, names in sorted(groups.items()):
            sizes = [params.tensors[n].size for n in names]
            bounds = np.cumsum([0] + sizes)
            picks = rng.choice(bounds[-1], size=min(100, bounds[-1]), replace=False)
            c.that(len(picks) >= 100, f"{group}: only {len(picks)} coordinates")
            worst = 0.0
            for pick in picks:
                i = int(np.searchsorted(bounds, pick, side="right") - 1)
                flat = params.tensors[names[i]].reshape(-1)
                coord = int(pick - bounds[i])
                orig = flat[coord]
                flat[coord] = orig + eps
                hi = forward(params, batch).loss
                flat[coord] = orig - eps
                lo = forward(params, batch).loss
                flat[coord] = orig
                fd = (hi - lo) / (2 * eps)
                an = grads[names[i]].reshape(-1)[coord]
                scale = max(abs(fd), abs(an))
                if scale > 1e-7:
                    worst = max(worst, abs(fd - an) / scale)
            c.that(worst < 1e-3, f"{group}: worst FD relative error {worst:.2e}")

        uniform = init_model(TOY, seed=0).astype(np.float64)
        uniform.tensors["tok_emb"][:] = 0.0
        c.close(forward(uniform, batch).loss, math.log(TOY.vocab_size), 1e-6,
                "uniform-logit loss vs ln V")

        attended = forward(init_model(TOY, seed=1), batch, collect_attention=True)
        worst_row = max(float(np.abs(p.sum(axis=-1) - 1.0).max())
                        for p in attended.attention)
        c.that(worst_row <= 1e-5, f"attention row sums off by {worst_row:.2e}")

        base = init_model(TOY, seed=7)
        other = init_model(TOY, seed=8)
        same = average_checkpoints(
            [Checkpoint(base.copy(), None, s) for s in (1, 2, 3)], 3)
        c.that(all(np.array_equal(same.tensors[k], base.tensors[k])
                   for k in base.tensors),
               "average of identical checkpoints must equal them exactly")
        solo = average_checkpoints(
            [Checkpoint(base.copy(), None, 1), Checkpoint(other.copy(), None, 2)], 1)
        c.that(all(np.array_equal(solo.tensors[k], other.tensors[k])
                   for k in base.tensors),
               "k=1 average must equal the latest checkpoint")
        pair = average_checkpoints(
            [Checkpoint(other.copy(), None, 3), Checkpoint(base.copy(), None, 1),
             Checkpoint(base.copy(), None, 2)], 2)
        for key in base.tensors:
            want = ((base.tensors[key].astype(np.float64)
                     + other.tensors[key].astype(np.float64)) / 2).astype(np.float32)
            c.that(np.array_equal(pair.tensors[key], want),
                   f"last-2 average wrong for {key}")

    _verdict(capsys, 3, "numerics", body)


# ------------------------------------------------------------- criterion 4


def _greedy_ids(scorer: NeuralScorer, src: list[int], lang_index: int) -> tuple[int, ...]:
    logprobs, state = scorer.step(scorer.start(src, lang_index), BOS_ID)
    ids: list[int] = []
    for _ in range(2 * len(src) + 50):
        row = np.asarray(logprobs, dtype=np.float64).copy()
        row[PAD_ID] = -np.inf
        row[BOS_ID] = -np.inf
        nxt = int(np.argmax(row))
        ids.append(nxt)
        if nxt == EOS_ID:
            break
        logprobs, state = scorer.step(state, nxt)
    return tuple(ids)


def _crc_row(prefix: tuple[int, ...], seed: int) -> np.ndarray:
    rng = np.random.default_rng(zlib.crc32(bytes((seed, *prefix))))
    logits = rng.normal(size=12) * 1.5
    shifted = np.exp(logits - logits.max())
    return np.log(shifted / shifted.sum())


class CrcScorer:
    """Deterministic random distributions keyed by the decoded prefix."""

    vocab_size = 12

    def __init__(self, seed: int) -> None:
        self.seed = seed

    def start(self, src_ids, lang_index: int):
        return ()

    def step(self, state, prev_id: int):
        new = state if (prev_id == BOS_ID and not state) else state + (prev_id,)
        return _crc_row(new, self.seed), new


def _exhaustive_best(seed: int, required: int, alpha: float, max_len: int):
    continuing = [UNK_ID, SEN_ID, *range(FIRST_LANG_ID, 12)]
    best_ids, best_score = None, -math.inf
    stack: list[tuple[tuple[int, ...], float]] = [((), 0.0)]
    while stack:
        prefix, acc = stack.pop()
        row = _crc_row(prefix, seed)
        if len(prefix) + 1 <= max_len and prefix.count(SEN_ID) >= required - 1:
            score = (acc + row[EOS_ID]) / length_penalty(len(prefix) + 1, alpha)
            if score > best_score:
                best_ids, best_score = (*prefix, EOS_ID), score
        if len(prefix) + 2 <= max_len:
            for tok in continuing:
                stack.append(((*prefix, tok), acc + row[tok]))
    return best_ids, best_score


def test_criterion_4_decode_contract(doc_model, vocab, timings, capsys):
    def body(c: Checks) -> None:
        # seed keys the cipher itself, so probe docs must reuse the training
        # seed; a larger train_docs extends the same stream past the 160 docs
        # per language the model saw, mixing seen and fresh documents.
        spec = SynthSpec(languages=LANGUAGES, base=BASE, train_docs=334, dev_docs=1,
                         mono_docs=1, contrastive_items=1, seed=0)
        data = generate(spec)
        docs = [(lang, doc)
                for lang in LANGUAGES
                for doc in data.pairs[lang].train.src.docs][:1000]
        c.that(len(docs) == 1000, f"only {len(docs)} probe documents")
        beam = BeamConfig()
        mismatched = forced = chunks = 0
        for lang, doc in docs:
            result = doc_infer(doc_model, vocab, doc, lang, CHUNK_SIZE, beam)
            mismatched += int(not result.count_preserved)
            forced += result.forced_stops
            chunks += result.chunks
        c.that(mismatched == 0,
               f"{mismatched}/1000 documents broke the sentence count")
        c.that(forced / chunks < 0.01, f"forced stops on {forced}/{chunks} chunks")

        for lang, doc in docs[:30]:
            one = doc_infer(doc_model, vocab, doc, lang, 1, beam)
            sen = sen_infer(doc_model, vocab, doc, lang, beam)
            c.that(one.sentences == sen.sentences,
                   f"chunk_size=1 doc_infer differs from sen_infer on a {lang} doc")

        scorer = NeuralScorer(doc_model)
        greedy_beam = BeamConfig(beam_size=1, alpha=0.6)
        for lang, doc in docs[:10]:
            for sentence in doc[:2]:
                src = vocab.encode(sentence)
                hyp = beam_search(scorer, src, vocab.lang_index(lang), greedy_beam, 1)
                c.that(hyp.ids == _greedy_ids(scorer, src, vocab.lang_index(lang)),
                       f"beam_size=1 differs from the greedy rollout on {lang!r}")

        for seed in range(6):
            for required in (1, 2):
                hyp = beam_search(CrcScorer(seed), [5], 0,
                                  BeamConfig(beam_size=512, alpha=0.6, max_len=3),
                                  required_sens=required)
                ids, score = _exhaustive_best(seed, required, alpha=0.6, max_len=3)
                c.that(hyp.ids == ids,
                       f"seed {seed} required {required}: {hyp.ids} != optimal {ids}")
                c.close(hyp.score, score, 1e-9,
                        f"seed {seed} required {required} score")
                c.that(hyp.finished and not hyp.forced_stop,
                       f"seed {seed} required {required}: not cleanly finished")

    # decode-only cost; the shared desk model is trained once for criteria 5/6
    _verdict(capsys, 4, "decode contract", body)


# ------------------------------------------------------------- criterion 5


def test_criterion_5_docinfer_on_sennmt_degrades(sen_model, vocab, synth_data,
                                                 timings, capsys):
    def body(c: Checks) -> None:
        beam = BeamConfig()
        sen_docs, doc_docs, refs = [], [], []
        for lang in LANGUAGES:
            dev = synth_data.pairs[lang].dev
            for doc, ref in zip(dev.src.docs, dev.tgt.docs):
                sen = sen_infer(sen_model, vocab, doc, lang, beam)
                full = doc_infer(sen_model, vocab, doc, lang, CHUNK_SIZE, beam)
                sen_docs.append(list(sen.sentences) or ["[UNK]"])
                doc_docs.append(list(full.sentences) or ["[UNK]"])
                refs.append(list(ref))
        ref_corpus = DocumentCorpus(language=BASE, docs=refs)
        via_sen = doc_bleu(DocumentCorpus(language="hyp", docs=sen_docs), ref_corpus)
        via_doc = doc_bleu(DocumentCorpus(language="hyp", docs=doc_docs), ref_corpus)
        c.that(via_sen - via_doc >= 0.05,
               f"SenInfer {via_sen:.4f} vs DocInfer {via_doc:.4f}: gap "
               f"{via_sen - via_doc:.4f} < 0.05")

    _verdict(capsys, 5, "DocInfer degrades a sentence-only model", body,
             charged=timings.get("pretrain", 0.0))


# ------------------------------------------------------------- criterion 6


def test_criterion_6_zero_shot_transfer(doc_model, sen_model, vocab, synth_data,
                                        timings, capsys):
    def body(c: Checks) -> None:
        items = synth_data.pairs[STUDENT].contrastive
        tuned = contrastive_report(doc_model, vocab, items, STUDENT, context_size=1)
        baseline = contrastive_report(sen_model, vocab, items, STUDENT, context_size=1)
        c.that(tuned.value >= 0.65,
               f"student contrastive accuracy {tuned.value:.4f} < 0.65")
        c.that(tuned.value > baseline.value,
               f"student {tuned.value:.4f} does not beat the sentence-only "
               f"baseline {baseline.value:.4f}")

        beam = BeamConfig()
        broken = 0
        for doc in synth_data.pairs[STUDENT].dev.src.docs:
            result = doc_infer(doc_model, vocab, doc, STUDENT, CHUNK_SIZE, beam)
            broken += int(not result.count_preserved)
        c.that(broken == 0, f"{broken} student documents broke the sentence count")

    _verdict(capsys, 6, "zero-shot document transfer", body,
             charged=timings.get("pretrain", 0.0) + timings.get("finetune", 0.0))


# ------------------------------------------------------------- criterion 7


def _fixture_row(**kw) -> DirectionRow:
    values = dict(seed=1, mode="12n", condition="genuine", stage="doc", p=0.3,
                  run=0, teachers=("aa",), direction="bb", teacher_sentences=10,
                  student_sentences=10, metric="bleu_sen", value=0.0)
    values.update(kw)
    return DirectionRow(**values)


def test_criterion_7_sweep_mechanics(capsys):
    def body(c: Checks) -> None:
        for n in (2, 3, 4):
            languages = tuple(f"l{i}" for i in range(n))
            grid = ExperimentGrid(modes=("n21", "12n"), p_values=(0.2, 0.5),
                                  pretrain=TrainConfig(steps=3, batch_size=8, warmup=2),
                                  finetune=TrainConfig(steps=3, batch_size=8, warmup=2))
            runs = enumerate_configs(languages, grid)
            c.that(len(runs) == 2 * 2 * n,
                   f"N={n}: {len(runs)} runs, expected {2 * 2 * n}")
            c.that([r.index for r in runs] == list(range(len(runs))),
                   f"N={n}: indexes not contiguous")
            for run in runs:
                lone = run.students if run.mode == "n21" else run.teachers
                crowd = run.teachers if run.mode == "n21" else run.students
                c.that(len(lone) == 1 and set(crowd) == set(languages) - set(lone),
                       f"N={n}: bad assignment {run}")

        rows = [
            _fixture_row(run=0, direction="bb", value=0.2),
            _fixture_row(run=0, direction="cc", value=0.4),
            _fixture_row(run=1, teachers=("bb",), direction="aa", value=0.5),
        ]
        (cell,) = summarize(rows)
        c.close(cell.mean, 0.4, 1e-12, "directions-first mean")
        c.close(cell.std, 0.1, 1e-12, "directions-first std")
        c.that(cell.n == 2, f"cell pooled {cell.n} runs, expected 2")

        spec = SynthSpec(languages=("aa", "bb"), base=BASE, train_docs=6, dev_docs=2,
                         mono_docs=2, contrastive_items=3, min_sentences=3,
                         max_sentences=4, seed=0)
        data = generate(spec)
        grid = ExperimentGrid(modes=("n21", "12n"), p_values=(0.5,),
                              pretrain=TrainConfig(steps=3, batch_size=8, warmup=2),
                              finetune=TrainConfig(steps=3, batch_size=8, warmup=2),
                              chunk_size=2, vocab_size=150,
                              beam=BeamConfig(beam_size=1, max_len=10),
                              keep_average=2, seeds=(1,))
        first = run_sweep(data, grid, manifest_hash="acceptance")
        second = run_sweep(data, grid, manifest_hash="acceptance")
        c.that(directions_tsv(first) == directions_tsv(second),
               "direction TSVs differ between identical reruns")
        c.that(summary_tsv(first) == summary_tsv(second),
               "summary TSVs differ between identical reruns")

    _verdict(capsys, 7, "sweep mechanics", body)


# ------------------------------------------------------------- criterion 8


def test_criterion_8_backtranslation_fidelity(synth_data, tmp_path, capsys):
    def body(c: Checks) -> None:
        pair = synth_data.pairs[TEACHERS[0]].train
        mono = synth_data.pairs[TEACHERS[0]].mono
        config = BTConfig.halved_from(240, 400)
        c.that(config.vocab_size == 120 and config.steps == 200,
               f"halving derivation produced {config.vocab_size}/{config.steps}")
        reverse = train_reverse_bilingual(pair, config,
                                          main_vocab_size=240, main_steps=400)
        manifest = reverse.manifest
        c.that(manifest["vocab_size"] == manifest["main_vocab_size"] // 2,
               f"manifest vocab {manifest['vocab_size']} is not half of "
               f"{manifest['main_vocab_size']}")
        c.that(manifest["steps"] * 2 == manifest["main_steps"],
               f"manifest steps {manifest['steps']} is not half of "
               f"{manifest['main_steps']}")

        pseudo = back_translate_docs(reverse, mono, BeamConfig(beam_size=2))
        c.that(pseudo.num_docs == mono.num_docs,
               f"{pseudo.num_docs} pseudo docs vs {mono.num_docs} mono docs")
        aligned = sum(len(s) == len(t) == len(m) for s, t, m in
                      zip(pseudo.src.docs, pseudo.tgt.docs, mono.docs))
        c.that(aligned == mono.num_docs,
               f"only {aligned}/{mono.num_docs} pseudo documents aligned")

        pseudo_path = tmp_path / "pseudo.txt"
        mono_path = tmp_path / "mono.txt"
        write_doc_corpus(pseudo.tgt, pseudo_path)
        write_doc_corpus(mono, mono_path)
        c.that(pseudo_path.read_bytes() == mono_path.read_bytes(),
               "pseudo target side is not byte-identical to the mono input")

    _verdict(capsys, 8, "back-translation structural fidelity", body)
