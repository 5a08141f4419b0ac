"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the verdict lines.
"""

import json
import random
import time

import numpy as np
import pytest

from s2srl.analysis import EXACT, analyze
from s2srl.cli import main
from s2srl.corpus import read_props, write_props
from s2srl.decode import decode_all, recovered_outputs, teacher_forced_accuracy, to_conll
from s2srl.linearize import delinearize, linearize
from s2srl.model import ModelConfig, mixed_softmax
from s2srl.scoring import oracle_bounds, reproduction_stats, score, span_counts
from s2srl.train import TrainConfig, build_vocab, prepare, train

from conftest import VERDICTS, model_grad_check, sentence, tiny_setup
from test_scoring import brute_force_counts

# Epoch budget for the overfit run at default hyperparameters.
OVERFIT_EPOCHS = 65
OVERFIT_SECONDS = 15 * 60


def verdict(n, name, ok, detail=""):
    line = f"criterion {n} {'PASS' if ok else 'FAIL'}: {name}" + (f" ({detail})" if detail else "")
    VERDICTS.append(line)
    print("\n" + line)
    return ok


def run(*argv):
    return main([str(a) for a in argv])


# -- 1 -------------------------------------------------------------------------


def test_1_gradient_correctness():
    t0 = time.perf_counter()
    worst = 0.0
    for copy in (True, False):
        model, vocab, _, enc = tiny_setup(dim=8, n_words=20, copy=copy)
        worst = max(worst, model_grad_check(model, vocab, enc))
    seconds = time.perf_counter() - t0
    ok = worst < 1e-4 and seconds < 30
    assert verdict(1, "full-model gradient check", ok, f"max rel err {worst:.2e}, {seconds:.1f}s")


# -- 2 -------------------------------------------------------------------------


def test_2_mixed_softmax_normalization():
    rng = np.random.default_rng(0)
    words = ["a", "b", "c"]
    index = {w: i for i, w in enumerate(words)}
    worst_mass = worst_copy = worst_prob = 0.0
    for _ in range(1000):
        n_src = int(rng.integers(2, 9))
        keys = list(rng.choice(words + ["x", "y"], size=n_src))
        keys[int(rng.integers(1, n_src))] = keys[0]  # force a repeated word
        gen = rng.normal(scale=3, size=7)
        cop = rng.normal(scale=3, size=n_src)
        d = mixed_softmax(gen, cop, keys, index)
        # independent oracle: plain exponentials over the enumerated event space
        z = sum(np.exp(g) for g in gen) + sum(np.exp(c) for c in cop)
        worst_mass = max(worst_mass, abs(d.total() - 1.0))
        for w in set(keys):
            expect = sum(np.exp(cop[j]) for j in range(n_src) if keys[j] == w) / z
            worst_copy = max(worst_copy, abs(d.copy_mass(w) - expect))
            gen_part = np.exp(gen[index[w]]) / z if w in index else 0.0
            worst_prob = max(worst_prob, abs(d.prob(w) - (gen_part + expect)))
    ok = worst_mass < 1e-9 and worst_copy < 1e-12 and worst_prob < 1e-12
    assert verdict(2, "mixed-softmax normalization", ok,
                   f"mass err {worst_mass:.1e}, copy-sum err {worst_copy:.1e}")


# -- 3 -------------------------------------------------------------------------


def test_3_linearization_round_trip(toy_path, toy):
    n_pred = sum(len(s.predicates) for s in toy)
    roles = {sp.role for s in toy for p in s.predicates for sp in p.spans if sp.role != "V"}
    bad = 0
    for i, s in enumerate(toy):
        for k, p in enumerate(s.predicates):
            inst = linearize(s, k, i)
            d = delinearize(inst.target, inst.source)
            words = [t.lower() for t in s.tokens]
            bad += not (d.comparable and d.repairs == 0 and d.words == words and d.spans == p.spans)
    text = toy_path.read_text(encoding="utf-8")
    same_bytes = write_props(read_props(text)).encode() == text.encode()
    ok = len(toy) >= 50 and n_pred >= 80 and len(roles) >= 8 and bad == 0 and same_bytes
    assert verdict(3, "linearization and props round trip", ok,
                   f"{len(toy)} sentences, {n_pred} predicates, {len(roles)} roles, {bad} failures")


# -- 4 -------------------------------------------------------------------------


def test_4_scorer_oracle_equivalence(toy):
    rnd = random.Random(4)
    checked = mismatches = 0
    for s in toy:
        for p in s.predicates:
            if len(p.spans) > 4:
                continue
            variants = [p.spans, [], p.spans[:1]]
            shifted = [type(x)(x.start, x.end, "A9" if rnd.random() < 0.5 else x.role) for x in p.spans]
            variants.append(shifted)
            for pred in variants:
                c = span_counts(pred, p.spans)
                checked += 1
                mismatches += (c.correct, c.predicted, c.gold) != brute_force_counts(pred, p.spans)
    gold = sentence(["w"] * 8, (7, "x", [(0, 2, "A0"), (5, 5, "A1"), (7, 7, "V")]))
    pred = sentence(["w"] * 8, (7, "x", [(0, 2, "A0"), (4, 5, "A1"), (7, 7, "V")]))
    r = score([pred], [gold])
    hand = r.precision == r.recall == r.f1 == 50.0
    ok = checked > 0 and mismatches == 0 and hand
    assert verdict(4, "scorer vs brute force", ok,
                   f"{checked} structures, {mismatches} mismatches, hand P/R/F1 {r.f1:.1f}")


# -- 5 -------------------------------------------------------------------------


def test_5_oracle_bounds():
    good = sentence(["w"] * 6, (5, "x", [(0, 1, "A0"), (2, 3, "A1"), (5, 5, "V")]))
    bad = sentence(["w"] * 7, (6, "x", [(0, 0, "A0"), (1, 2, "A1"), (3, 4, "A2"), (6, 6, "V")]))
    bad_pred = sentence(["w"] * 7, (6, "x", [(6, 6, "V")]))
    low, high = oracle_bounds([good, bad_pred], [good, bad], [[True], [False]])
    fixture = abs(low - 400 / 7) < 0.01 and abs(high - 100.0) < 0.01
    rng = np.random.default_rng(5)
    ordered = 0
    for _ in range(300):
        gold, pred, flags = [], [], []
        for _ in range(int(rng.integers(1, 5))):
            n = 8
            spans_g = _random_spans(rng, n)
            spans_p = _random_spans(rng, n)
            gold.append(sentence(["w"] * n, (n - 1, "x", spans_g)))
            pred.append(sentence(["w"] * n, (n - 1, "x", spans_p)))
            flags.append([bool(rng.random() < 0.6)])
        lo, hi = oracle_bounds(pred, gold, flags)
        ordered += lo <= hi + 1e-12
    ok = fixture and ordered == 300
    assert verdict(5, "oracle bounds", ok, f"min {low:.2f}, max {high:.2f}, {ordered}/300 ordered")


def _random_spans(rng, n):
    spans, i = [], 0
    while i < n - 1:
        j = int(rng.integers(i, n - 1))
        if rng.random() < 0.5:
            spans.append((i, j, str(rng.choice(["A0", "A1", "A2"]))))
        i = j + 1
    return spans + [(n - 1, n - 1, "V")]


# -- 6 -------------------------------------------------------------------------


@pytest.fixture(scope="session")
def overfit(toy):
    raw = [linearize(s, k, i) for i, s in enumerate(toy) for k in range(len(s.predicates))]
    tc = TrainConfig(epochs=OVERFIT_EPOCHS)
    vocab, _, _ = build_vocab(raw, tc.unk_threshold)
    instances = prepare(raw, vocab, tc.unk_threshold)
    t0 = time.perf_counter()
    model, _ = train(instances, vocab, ModelConfig(), tc)
    acc = teacher_forced_accuracy(model, vocab, instances)
    results = decode_all(model, vocab, instances)
    same, balanced = reproduction_stats(results)
    predicted, flags = to_conll(toy, recovered_outputs(results, instances))
    report = score(predicted, toy, flags)
    seconds = time.perf_counter() - t0
    exact = sum(r == i.original_target() for r, i in
                zip((o.tokens for o in recovered_outputs(results, instances)), instances))
    return {
        "accuracy": 100.0 * acc,
        "same": same,
        "balanced": balanced,
        "f1": report.f1,
        "exact": 100.0 * exact / len(instances),
        "seconds": seconds,
    }


@pytest.mark.slow
def test_6_overfit_reproduction(overfit):
    o = overfit
    ok = (o["accuracy"] >= 99 and o["same"] >= 95 and o["balanced"] >= 99 and o["f1"] >= 90
          and o["seconds"] < OVERFIT_SECONDS)
    detail = (f"{OVERFIT_EPOCHS} epochs, token acc {o['accuracy']:.2f}%, same length "
              f"{o['same']:.2f}%, balanced {o['balanced']:.2f}%, F1 {o['f1']:.2f}, "
              f"exact {o['exact']:.2f}%, {o['seconds']:.0f}s")
    assert verdict(6, "overfit reproduction", ok, detail)


# -- 7 -------------------------------------------------------------------------

ABLATION_CONFIG = "model:\n  embed_dim: 32\n  hidden_dim: 64\ntrain:\n  epochs: 25\n  batch_size: 6\n"


def _same_length(tmp_path, toy_path, name, *flags):
    prep, run_dir, dec = tmp_path / "prep", tmp_path / name, tmp_path / f"{name}_dec"
    if not prep.exists():
        assert run("preprocess", "--input", toy_path, "--output", prep) == 0
    config = tmp_path / "ablation.yaml"
    config.write_text(ABLATION_CONFIG)
    assert run("train", "--input", prep, "--output", run_dir, "--config", config, *flags) == 0
    assert run("decode", "--input", prep / "gold.props", "--checkpoint", run_dir / "model.ckpt",
               "--vocab", prep, "--output", dec) == 0
    assert run("score", "--input", dec, "--gold", prep / "gold.props",
               "--output", dec / "score.json") == 0
    return json.loads((dec / "score.json").read_text())["same_length_rate"]


@pytest.mark.slow
def test_7_ablation_direction(tmp_path, toy_path):
    with_copy = _same_length(tmp_path, toy_path, "copy")
    without = _same_length(tmp_path, toy_path, "attn", "--attention-only")
    assert verdict(7, "attention-only ablation", without < with_copy,
                   f"same length {without:.2f}% attention-only vs {with_copy:.2f}% with copy")


# -- 8 -------------------------------------------------------------------------


def _pipeline(root, toy_path, config):
    prep, run_dir, dec, ana = (root / d for d in ("prep", "run", "dec", "ana"))
    assert run("preprocess", "--input", toy_path, "--output", prep) == 0
    assert run("train", "--input", prep, "--output", run_dir, "--config", config, "--seed", 7) == 0
    assert run("decode", "--input", prep / "gold.props", "--checkpoint", run_dir / "model.ckpt",
               "--vocab", prep, "--output", dec) == 0
    assert run("score", "--input", dec, "--gold", prep / "gold.props",
               "--output", dec / "score.json") == 0
    assert run("analyze", "--input", dec, "--gold", prep / "gold.props", "--output", ana) == 0
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_8_determinism(tmp_path, toy_path):
    config = tmp_path / "det.yaml"
    config.write_text("model:\n  embed_dim: 8\n  hidden_dim: 16\ntrain:\n  epochs: 2\n")
    a = _pipeline(tmp_path / "a", toy_path, config)
    b = _pipeline(tmp_path / "b", toy_path, config)
    differing = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    ok = verdict(8, "bit-identical pipeline reruns", not differing and "run/model.ckpt" in a,
                 f"{len(a)} files compared, {len(differing)} differ")
    assert ok, differing


# -- 9 -------------------------------------------------------------------------


def test_9_analysis_integrity(toy):
    r = analyze(toy, toy)
    total = sum(r.overlap_counts.values())
    exact = r.overlap_counts[EXACT] == total > 0
    counts = np.array(r.confusion_counts)
    identity = not np.any(counts - np.diag(np.diag(counts))) and counts[-1, -1] == 0
    percent = np.array(r.confusion)[:-1, :-1]
    identity = identity and np.allclose(percent, 100.0 * np.eye(len(percent)))
    histograms = r.missing_histogram[1:] == [0, 0] and r.excess_histogram[1:] == [0, 0]
    ok = exact and identity and histograms and r.duplicate_rate == 0.0
    assert verdict(9, "gold-vs-gold analysis", ok,
                   f"{total} spans exact, {len(r.confusion_labels)} labels, dup {r.duplicate_rate}")
