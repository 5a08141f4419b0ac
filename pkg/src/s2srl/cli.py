"""Command-line entry point: preprocess, train, decode, score, analyze."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analysis import analyze, write_report
from .checkpoint import CheckpointError, atomic_write, load_checkpoint
from .corpus import ContractError, PropsParseError, load_props, write_props
from .decode import greedy_decode, recovered_outputs, to_conll
from .linearize import Instance, apply_vocab, linearize
from .model import ModelConfig
from .scoring import format_report, score
from .train import (
    ConfigError,
    TrainConfig,
    TrainingError,
    build_vocab,
    glove_words,
    load_glove,
    prepare,
    split_by_length,
    train,
)
from .vocab import Vocab

log = logging.getLogger("s2srl")


# -- configuration -------------------------------------------------------------


def _apply(target, values, section):
    names = {f.name for f in dataclasses.fields(target)}
    for key, value in values.items():
        if key not in names:
            raise ConfigError(f"unknown {section} option {key!r}")
        setattr(target, key, value)


def load_config(path=None, overrides=()):
    """Return (ModelConfig, TrainConfig) from a YAML/JSON file plus ``key=value`` overrides."""
    model_cfg, train_cfg = ModelConfig(), TrainConfig()
    if path is not None:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping with 'model' and 'train' sections")
        unknown = set(data) - {"model", "train"}
        if unknown:
            raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
        _apply(model_cfg, data.get("model") or {}, "model")
        _apply(train_cfg, data.get("train") or {}, "train")
    model_names = {f.name for f in dataclasses.fields(ModelConfig)}
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        value = yaml.safe_load(raw)
        if key in model_names:
            setattr(model_cfg, key, value)
        else:
            _apply(train_cfg, {key: value}, "train")
    try:
        model_cfg.validate(sized=False)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    train_cfg.validate()
    return model_cfg, train_cfg


def provenance(command, args, model_cfg=None, train_cfg=None, **extra):
    seed = train_cfg.seed if train_cfg is not None else getattr(args, "seed", None)
    meta = {"command": command, "version": __version__, "seed": seed}
    if model_cfg is not None:
        meta["model_config"] = model_cfg.to_dict()
    if train_cfg is not None:
        meta["train_config"] = train_cfg.to_dict()
    meta.update(extra)
    return meta


def _write_text(path, text):
    atomic_write(path, text.encode("utf-8"))


def _write_json(path, obj):
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _need(path, hint):
    path = Path(path)
    if not path.exists():
        raise ContractError(f"{path} not found; {hint}")
    return path


def _configs(args):
    model_cfg, train_cfg = load_config(args.config, args.set or ())
    if getattr(args, "seed", None) is not None:
        train_cfg.seed = args.seed
    if getattr(args, "threshold", None) is not None:
        train_cfg.unk_threshold = args.threshold
    if getattr(args, "epochs", None) is not None:
        train_cfg.epochs = args.epochs
    if getattr(args, "attention_only", False):
        model_cfg.copy = False
    train_cfg.validate()
    return model_cfg, train_cfg


# -- subcommands -------------------------------------------------------------------


def cmd_preprocess(args):
    model_cfg, train_cfg = _configs(args)
    if args.max_len is not None:
        train_cfg.max_seq_len = args.max_len
    sentences = load_props(_need(args.input, "pass an existing props file with --input"))
    raw = [linearize(s, k, i) for i, s in enumerate(sentences) for k in range(len(s.predicates))]
    kept, dropped = split_by_length(raw, train_cfg.max_seq_len)
    vocab, _, _ = build_vocab(kept, train_cfg.unk_threshold, args.glove)
    covered = glove_words(args.glove) if args.glove else None
    instances = prepare(kept, vocab, train_cfg.unk_threshold, covered)

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / "train.src", "".join(" ".join(i.source) + "\n" for i in instances))
    _write_text(out / "train.tgt", "".join(" ".join(i.target) + "\n" for i in instances))
    _write_text(
        out / "unk_maps.jsonl",
        "".join(
            json.dumps({"origin": list(i.origin), "unk_map": [list(p) for p in i.unk_map]}) + "\n"
            for i in instances
        ),
    )
    vocab.save(out)
    _write_text(out / "gold.props", write_props(sentences))
    meta = provenance(
        "preprocess", args, model_cfg, train_cfg,
        sentences=len(sentences), instances=len(raw), kept=len(kept), dropped=dropped,
        words=vocab.n_words, labels=vocab.n_labels,
    )
    _write_json(out / "meta.json", meta)
    print(f"{len(raw)} instances from {len(sentences)} sentences, {dropped} dropped "
          f"(longer than {train_cfg.max_seq_len}); |V|={vocab.n_words} |L|={vocab.n_labels}")
    return 0


def read_prepared(directory):
    d = Path(directory)
    hint = "run `s2srl preprocess` first"
    src = _need(d / "train.src", hint).read_text(encoding="utf-8").splitlines()
    tgt = _need(d / "train.tgt", hint).read_text(encoding="utf-8").splitlines()
    maps = _need(d / "unk_maps.jsonl", hint).read_text(encoding="utf-8").splitlines()
    _need(d / "vocab.txt", hint)
    if not len(src) == len(tgt) == len(maps):
        raise ContractError(f"{d}: train.src, train.tgt and unk_maps.jsonl differ in length")
    instances = []
    for s, t, m in zip(src, tgt, maps):
        rec = json.loads(m)
        unk_map = [(int(p), w) for p, w in rec["unk_map"]]
        instances.append(Instance(s.split(), t.split(), unk_map, tuple(rec["origin"])))
    return instances, Vocab.load(d)


def cmd_train(args):
    model_cfg, train_cfg = _configs(args)
    instances, vocab = read_prepared(args.input)
    embeddings = None
    if args.glove:
        rng = np.random.default_rng(train_cfg.seed)
        embeddings, coverage = load_glove(args.glove, vocab, model_cfg.embed_dim, rng)
        log.info("embedding coverage %.1f%% of V", 100 * coverage)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    model_cfg.vocab_size, model_cfg.label_count = vocab.n_words, vocab.n_labels
    meta = provenance("train", args, model_cfg, train_cfg)
    _, logs = train(instances, vocab, model_cfg, train_cfg, out, embeddings, meta)
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "mean_loss"])
    w.writerows([e.epoch, repr(e.mean_loss)] for e in logs)
    _write_text(out / "train_log.csv", buf.getvalue())
    for e in logs:
        print(e.line())
    print(f"checkpoint written to {out / 'model.ckpt'}")
    return 0


def _gold_path(path):
    path = Path(path)
    return path / "gold.props" if path.is_dir() else path


def cmd_decode(args):
    expect = Vocab.load(args.vocab) if args.vocab else None
    model, vocab, ckpt_meta = load_checkpoint(args.checkpoint, expect)
    sentences = load_props(_need(_gold_path(args.input), "pass a props file or preprocess dir"))
    raw = [linearize(s, k, i) for i, s in enumerate(sentences) for k in range(len(s.predicates))]
    instances = [apply_vocab(i, vocab.words) for i in raw]
    results = [greedy_decode(model, vocab, i, args.max_len) for i in instances]
    outputs = recovered_outputs(results, instances)
    predicted, flags = to_conll(sentences, outputs)

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    meta = provenance("decode", args, train_seed=ckpt_meta.get("train_config", {}).get("seed"),
                      model_config=model.config.to_dict(), checkpoint_vocab_sha256=vocab.digest())
    _write_text(out / "decode.tgt", "".join(" ".join(o.tokens) + "\n" for o in outputs))
    records = []
    for r, o in zip(results, outputs):
        rec = r.to_json()
        rec["recovered"] = o.tokens
        records.append(rec)
    _write_json(out / "decode.json", {"meta": meta, "instances": records})
    _write_text(out / "predicted.props", write_props(predicted))
    _write_text(out / "attention.csv", attention_csv(results, instances, meta))
    same = sum(r.comparable for r in results)
    balanced = sum(r.repairs == 0 for r in results)
    n = max(1, len(results))
    print(f"decoded {len(results)} instances: same length {100 * same / n:.2f}%, "
          f"balanced brackets {100 * balanced / n:.2f}%")
    return 0


def attention_csv(results, instances, meta):
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sentence", "predicate", "step", "output", "position", "source", "weight"])
    for r, inst in zip(results, instances):
        src = inst.original_source()
        steps = r.tokens + ["<eos>"]
        for t, weights in enumerate(r.attention):
            for j, a in enumerate(weights[: len(src)]):
                w.writerow([r.origin[0], r.origin[1], t, steps[t] if t < len(steps) else "",
                            j, src[j], f"{a:.6f}"])
    return buf.getvalue()


def _load_predictions(path, gold):
    """Predicted sentences plus comparability flags and decode records when available."""
    path = Path(path)
    props = path / "predicted.props" if path.is_dir() else path
    predicted = load_props(_need(props, "run `s2srl decode` first or pass a props file"))
    sidecar = props.parent / "decode.json"
    flags = records = None
    if sidecar.exists():
        data = json.loads(sidecar.read_text(encoding="utf-8"))
        records = [_Record(r["comparable"], r["repairs"]) for r in data["instances"]]
        flags = [[True] * len(s.predicates) for s in gold]
        for r in data["instances"]:
            s, k = r["origin"]
            if s >= len(flags) or k >= len(flags[s]):
                raise ContractError(f"{sidecar}: origin {r['origin']} not in the gold file")
            flags[s][k] = bool(r["comparable"])
    return predicted, flags, records


@dataclasses.dataclass
class _Record:
    comparable: bool
    repairs: int


def cmd_score(args):
    gold = load_props(_need(args.gold, "pass the gold props file with --gold"))
    predicted, flags, records = _load_predictions(args.input, gold)
    report = score(predicted, gold, flags, records)
    report.meta = provenance("score", args)
    print(format_report(report))
    if args.output:
        out = Path(args.output)
        if out.suffix != ".json":
            out.mkdir(parents=True, exist_ok=True)
            out = out / "score.json"
        _write_json(out, report.to_dict())
    return 0


def cmd_analyze(args):
    gold = load_props(_need(args.gold, "pass the gold props file with --gold"))
    predicted, flags, _ = _load_predictions(args.input, gold)
    report = analyze(predicted, gold, flags, meta=provenance("analyze", args))
    paths = write_report(report, args.output)
    oc = report.overlap_counts
    total = max(1, sum(oc.values()))
    print(f"{report.structures} structures; exact {100 * oc['exact'] / total:.1f}%, "
          f"partial {100 * oc['partial'] / total:.1f}%, none {100 * oc['none'] / total:.1f}%")
    print(f"wrote {len(paths)} files to {args.output}")
    return 0


# -- parser ----------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="s2srl", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_output=True):
        sp.add_argument("--input", required=True)
        sp.add_argument("--output", required=needs_output)
        sp.add_argument("--config", help="YAML or JSON file with model/train sections")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any model or train option; may repeat")

    sp = sub.add_parser("preprocess", help="linearize a props file and build vocabularies")
    common(sp)
    sp.add_argument("--threshold", type=int, help="minimum word frequency for V")
    sp.add_argument("--max-len", type=int, help="drop training targets longer than this")
    sp.add_argument("--glove", help="restrict V to words covered by this embedding file")
    sp.set_defaults(func=cmd_preprocess)

    sp = sub.add_parser("train", help="train a model on a preprocessed directory")
    common(sp)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--glove", help="initialize embeddings from this text file")
    sp.add_argument("--attention-only", action="store_true", help="disable the copy mode")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("decode", help="greedy-decode every predicate of a props file")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--vocab", help="preprocess dir whose vocabulary must match the checkpoint")
    sp.add_argument("--max-len", type=int, help="decode length cap (default 2*T_x+10)")
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("score", help="span P/R/F1 against gold")
    common(sp, needs_output=False)
    sp.add_argument("--gold", required=True)
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("analyze", help="error analysis CSVs and SVG figures")
    common(sp)
    sp.add_argument("--gold", required=True)
    sp.set_defaults(func=cmd_analyze)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ContractError, PropsParseError, CheckpointError, ConfigError, TrainingError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
