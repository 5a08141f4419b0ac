"""Vocabulary construction, embedding init and the Adam training loop."""

from __future__ import annotations

import logging
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .checkpoint import save_checkpoint
from .linearize import PRED, apply_unk, is_bracket
from .model import ModelConfig, Seq2SeqModel, encode_instance
from .vocab import Vocab, order_labels

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr: float = 0.001
    clip_norm: float = 5.0
    epochs: int = 4
    batch_size: int = 6
    unk_threshold: int = 10
    max_seq_len: int = 100
    seed: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def validate(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.clip_norm <= 0:
            raise ConfigError(f"clip_norm must be positive, got {self.clip_norm}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}")

    def to_dict(self):
        return asdict(self)


# -- vocabulary --------------------------------------------------------------


def word_counts(instances) -> Counter:
    """Word frequencies over the (unmasked) source sides of training sequences."""
    counts = Counter()
    for inst in instances:
        counts.update(w for w in inst.source if w != PRED)
    return counts


def glove_words(path) -> set[str]:
    words = set()
    with open(path, encoding="utf-8") as f:
        for line in f:
            head = line.split(" ", 1)[0].strip()
            if head:
                words.add(head)
    return words


def build_vocab(instances, threshold, embedding_file=None):
    """Return (vocab, labels, counts) from raw linearized training instances.

    V keeps words seen at least ``threshold`` times (and covered by the
    embedding file, when one is given) plus the special tokens; L holds every
    bracket token seen in the targets.
    """
    counts = word_counts(instances)
    covered = glove_words(embedding_file) if embedding_file else None
    kept = [
        w
        for w, c in counts.items()
        if c >= threshold and (covered is None or w in covered)
    ]
    kept.sort(key=lambda w: (-counts[w], w))
    labels = order_labels({t for inst in instances for t in inst.target if is_bracket(t)})
    vocab = Vocab(kept, labels, counts)
    return vocab, labels, counts


def prepare(instances, vocab, threshold, covered=None):
    """UNK-mask instances against the vocabulary's frequency table."""
    return [apply_unk(i, vocab.counts, threshold, covered) for i in instances]


def split_by_length(instances, max_len):
    kept = [i for i in instances if len(i.target) <= max_len]
    return kept, len(instances) - len(kept)


def load_glove(path, vocab: Vocab, embed_dim: int, rng=None):
    """Embedding table for V and L: file vectors where available, else U(-0.1, 0.1).

    Returns (table, coverage) where coverage = covered words / |V|.
    """
    rng = rng or np.random.default_rng(0)
    table = rng.uniform(-0.1, 0.1, size=(len(vocab), embed_dim))
    covered = 0
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            word, values = parts[0], parts[1:]
            if len(values) != embed_dim:
                raise ConfigError(
                    f"{path}:{lineno}: vector has {len(values)} dims, embed_dim is {embed_dim}"
                )
            i = vocab.stoi.get(word)
            if i is not None and vocab.is_word_id(i):
                table[i] = np.array([float(v) for v in values])
                covered += 1
    return table, covered / vocab.n_words


# -- optimization ------------------------------------------------------------


# Adam updates run over blocks of this many entries so the temporaries stay in cache.
ADAM_BLOCK = 1 << 15


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    scratch: tuple = field(
        default_factory=lambda: (np.empty(ADAM_BLOCK), np.empty(ADAM_BLOCK)), repr=False
    )


def clip_gradients(params, max_norm=5.0) -> float:
    """Scale all grads so their global L2 norm is at most ``max_norm``."""
    sq = sum(float(np.vdot(p.grad, p.grad)) for p in params if p.grad is not None)
    norm = np.sqrt(sq)
    if norm <= max_norm:
        return 1.0
    factor = max_norm / norm
    for p in params:
        if p.grad is not None:
            p.grad *= factor
    return factor


def adam_step(params, state: AdamState, config: TrainConfig):
    for p in params:
        if p.grad is not None and not np.isfinite(np.vdot(p.grad, p.grad)):
            raise TrainingError(
                f"non-finite gradient in {p.name or 'parameter'} at step {state.step + 1}"
            )
    state.step += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p in params:
        if p.grad is None:
            continue
        key = id(p)
        if key not in state.m:
            state.m[key] = np.zeros(p.data.shape)
            state.v[key] = np.zeros(p.data.shape)
        flat = [x.reshape(-1) for x in (p.data, p.grad, state.m[key], state.v[key])]
        if not np.shares_memory(flat[0], p.data):
            p.data = np.ascontiguousarray(p.data)
            flat[0] = p.data.reshape(-1)
        for lo in range(0, flat[0].size, ADAM_BLOCK):
            w, g, m, v = (x[lo : lo + ADAM_BLOCK] for x in flat)
            num, den = (x[: w.size] for x in state.scratch)
            # lr * (m / c1) / (sqrt(v / c2) + eps), evaluated in place in that order
            m *= b1
            np.multiply(1.0 - b1, g, out=num)
            m += num
            v *= b2
            np.square(g, out=den)
            den *= 1.0 - b2
            v += den
            np.divide(m, c1, out=num)
            num *= config.lr
            np.divide(v, c2, out=den)
            np.sqrt(den, out=den)
            den += config.eps
            num /= den
            w -= num


# -- loop ----------------------------------------------------------------------


@dataclass
class EpochLog:
    epoch: int
    mean_loss: float
    seconds: float

    def line(self):
        return f"epoch {self.epoch} loss {self.mean_loss:.6f} time {self.seconds:.1f}s"


def train(
    instances,
    vocab: Vocab,
    model_config: ModelConfig,
    train_config: TrainConfig,
    out_dir=None,
    embeddings=None,
    meta=None,
    on_epoch=None,
):
    """Train on UNK-masked instances; returns (model, epoch logs).

    When ``out_dir`` is given, ``model.ckpt`` there is rewritten atomically
    after every epoch.
    """
    train_config.validate()
    if not instances:
        raise ConfigError("training corpus is empty")
    model_config.vocab_size = vocab.n_words
    model_config.label_count = vocab.n_labels
    model = Seq2SeqModel(model_config, seed=train_config.seed)
    if embeddings is not None:
        model.params["embedding"].data = np.array(embeddings, dtype=np.float64)
    encs = [encode_instance(i, vocab) for i in instances]
    rng = np.random.default_rng(train_config.seed)
    state = AdamState()
    params = model.parameters()
    logs = []
    if out_dir is not None and train_config.epochs == 0:
        save_checkpoint(Path(out_dir) / "model.ckpt", model, vocab, dict(meta or {}, epoch=0))
    for epoch in range(1, train_config.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(encs))
        total = 0.0
        for lo in range(0, len(order), train_config.batch_size):
            batch = [encs[i] for i in order[lo : lo + train_config.batch_size]]
            model.zero_grad()
            loss = model.batch_loss(batch, vocab, rng)
            T.backward(loss)
            clip_gradients(params, train_config.clip_norm)
            adam_step(params, state, train_config)
            total += loss.item() * len(batch)
        entry = EpochLog(epoch, total / len(encs), time.perf_counter() - t0)
        logs.append(entry)
        log.info(entry.line())
        if out_dir is not None:
            info = dict(meta or {}, epoch=epoch, train_config=train_config.to_dict())
            out = Path(out_dir)
            save_checkpoint(out / "model.ckpt", model, vocab, info)
        if on_epoch is not None:
            on_epoch(entry, model)
    return model, logs
