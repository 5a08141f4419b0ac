"""Attention + copy encoder-decoder over a shared word/label vocabulary.

Encoder: embedding lookup, then a stack of bidirectional LSTM layers.  The
top layer's rows ``h_j = [fwd_j; bwd_j]`` form the memory ``M``.

Decoder step (one LSTM layer, state ``s``)::

    e_j    = h_j . (W_a s_prev)             dot-product attention, bilinear bridge
    c      = sum_j softmax(e)_j h_j
    s      = LSTM([emb(y_prev); c], s_prev)
    gen    = W_o [s; c]                     scores over V and L
    copy_j = tanh(h_j W_c) . s              one score per source position

Both score vectors share one softmax normalizer.  A token's probability is its
generate mass plus the copy mass of every source position holding that word.
With ``attention_state="current"`` the decoder attends with the updated state
instead (Luong order) and feeds the previous context into the LSTM.

Instances are processed in padded, time-major batches: row ``t * B + b`` of
every sequence matrix is step ``t`` of instance ``b``.  A single instance is a
batch of one.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .linearize import BOS, EOS, PRED, is_bracket
from .tensor import Tensor


@dataclass
class ModelConfig:
    embed_dim: int = 100
    hidden_dim: int = 512
    encoder_layers: int = 2
    dropout_rate: float = 0.4
    vocab_size: int = 0
    label_count: int = 0
    copy: bool = True
    attention_state: str = "previous"
    init_scale: float = 0.1

    def validate(self, sized=True):
        """Check ranges; ``sized=False`` skips the vocabulary sizes set at training time."""
        names = ("embed_dim", "hidden_dim", "encoder_layers")
        if sized:
            names += ("vocab_size", "label_count")
        for name in names:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.attention_state not in ("previous", "current"):
            raise ValueError("attention_state must be 'previous' or 'current'")

    def to_dict(self):
        return asdict(self)


@dataclass
class EncoderMemory:
    """Encoder rows for a batch; ``mask[b, r]`` marks rows owned by instance b."""

    rows: Tensor
    rows_t: Tensor
    copy_t: Tensor
    init_state: Tensor
    mask: np.ndarray
    keys: list
    lengths: list[int]

    @property
    def batch_size(self):
        return len(self.lengths)

    def __len__(self):
        return self.rows.shape[0]

    def instance_rows(self, b):
        B = self.batch_size
        return [t * B + b for t in range(self.lengths[b])]


@dataclass
class DecoderState:
    s: Tensor
    cell: Tensor
    prev_id: int
    context: Tensor = None


@dataclass
class AttentionResult:
    weights: Tensor
    context: Tensor
    scores: Tensor


@dataclass
class MixedDistribution:
    """Probabilities over generate events (V and L) and copy events (positions)."""

    generate: np.ndarray
    copy: np.ndarray
    log_z: float
    source_keys: list = field(default_factory=list)
    index: dict = None

    def total(self) -> float:
        return float(self.generate.sum() + self.copy.sum())

    def copy_mass(self, token) -> float:
        return float(sum(p for p, k in zip(self.copy, self.source_keys) if k == token))

    def generate_mass(self, token) -> float:
        if self.index is None or token not in self.index:
            return 0.0
        return float(self.generate[self.index[token]])

    def prob(self, token) -> float:
        return self.generate_mass(token) + self.copy_mass(token)


def mixed_softmax(gen_scores, copy_scores, source_keys, index=None) -> MixedDistribution:
    """Normalize generate and copy scores with one shared partition function."""
    g = np.asarray(gen_scores, dtype=np.float64).reshape(-1)
    c = np.asarray(copy_scores, dtype=np.float64).reshape(-1)
    m = max(g.max() if g.size else -np.inf, c.max() if c.size else -np.inf)
    eg = np.exp(g - m)
    ec = np.exp(c - m)
    z = eg.sum() + ec.sum()
    return MixedDistribution(eg / z, ec / z, float(m + np.log(z)), list(source_keys), index)


@dataclass
class EncodedInstance:
    """Id-level view of one instance for teacher forcing."""

    source_ids: list[int]
    source_keys: list[str]
    input_ids: list[int]
    output_ids: list[int]
    output_keys: list[str]


def encode_instance(instance, vocab) -> EncodedInstance:
    ids = vocab.ids(instance.target)
    return EncodedInstance(
        source_ids=vocab.ids(instance.source),
        source_keys=instance.original_source(),
        input_ids=[vocab.bos_id] + ids,
        output_ids=ids + [vocab.eos_id],
        output_keys=instance.original_target() + [EOS],
    )


def _time_major(seqs, pad):
    B = len(seqs)
    L = max(len(s) for s in seqs)
    out = np.full(L * B, pad, dtype=np.int64)
    for b, s in enumerate(seqs):
        out[np.arange(len(s)) * B + b] = s
    return out


def _reverse_perm(lengths):
    """Involution mapping row t*B+b to (L_b-1-t)*B+b; padding rows stay put."""
    B = len(lengths)
    L = max(lengths)
    perm = np.arange(L * B)
    for b, n in enumerate(lengths):
        t = np.arange(n)
        perm[t * B + b] = (n - 1 - t) * B + b
    return perm


class Seq2SeqModel:
    def __init__(self, config: ModelConfig, seed: int = 0):
        config.validate()
        self.config = config
        rng = np.random.default_rng(seed)
        E, H = config.embed_dim, config.hidden_dim
        N = config.vocab_size + config.label_count
        k = config.init_scale
        p = OrderedDict()

        def make(name, *shape):
            p[name] = Tensor(rng.uniform(-k, k, size=shape), requires_grad=True, name=name)

        make("embedding", N, E)
        for layer in range(config.encoder_layers):
            width = E if layer == 0 else 2 * H
            for d in ("fwd", "bwd"):
                make(f"encoder.{layer}.{d}.w_ih", width, 4 * H)
                make(f"encoder.{layer}.{d}.w_hh", H, 4 * H)
                make(f"encoder.{layer}.{d}.b", 4 * H)
        make("bridge.w", 2 * H, H)
        make("bridge.b", H)
        # decoder LSTM input weights, split by the [embedding; context] input halves
        make("decoder.w_ie", E, 4 * H)
        make("decoder.w_ic", 2 * H, 4 * H)
        make("decoder.w_hh", H, 4 * H)
        make("decoder.b", 4 * H)
        make("attention.w", H, 2 * H)
        # stored transposed, (d_s + 2 d_h) x (|V| + |L|), for row-vector products
        make("output.w", 3 * H, N)
        make("copy.w", 2 * H, H)
        self.params = p

    @property
    def n_outputs(self):
        return self.config.vocab_size + self.config.label_count

    def parameters(self):
        return list(self.params.values())

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    # -- encoder ---------------------------------------------------------

    def _lstm(self, xproj, w_hh, B, steps):
        H = self.config.hidden_dim
        hs = []
        h = c = None
        for t in range(steps):
            gates = xproj[t * B : (t + 1) * B]
            if h is not None:
                gates = gates + h @ w_hh
            h, c = _cell(gates, c, H)
            hs.append(h)
        return T.concat(hs, axis=0)

    def encode_batch(self, sources, keys=None, rng=None) -> EncoderMemory:
        """Encode a list of source id sequences into one padded memory."""
        if not sources or any(len(s) == 0 for s in sources):
            raise ValueError("cannot encode an empty source")
        cfg = self.config
        p = self.params
        B = len(sources)
        lengths = [len(s) for s in sources]
        L = max(lengths)
        ids = _time_major(sources, 0)
        perm = _reverse_perm(lengths)
        x = T.gather_rows(p["embedding"], ids)
        x = T.dropout(x, cfg.dropout_rate, rng)
        for layer in range(cfg.encoder_layers):
            pre = f"encoder.{layer}."
            fwd = self._lstm(x @ p[pre + "fwd.w_ih"] + p[pre + "fwd.b"], p[pre + "fwd.w_hh"], B, L)
            xr = T.gather_rows(x, perm)
            bwd = self._lstm(xr @ p[pre + "bwd.w_ih"] + p[pre + "bwd.b"], p[pre + "bwd.w_hh"], B, L)
            bwd = T.gather_rows(bwd, perm)
            top = T.concat([fwd, bwd], axis=1)
            x = T.dropout(top, cfg.dropout_rate, rng)
        H = cfg.hidden_dim
        last = [(n - 1) * B + b for b, n in enumerate(lengths)]
        first = list(range(B))
        summary = T.concat(
            [T.gather_rows(top, last)[:, :H], T.gather_rows(top, first)[:, H:]], axis=1
        )
        init = T.tanh(summary @ p["bridge.w"] + p["bridge.b"])
        mask = np.zeros((B, L * B), dtype=bool)
        col_keys = [None] * (L * B)
        for b, n in enumerate(lengths):
            rows = np.arange(n) * B + b
            mask[b, rows] = True
            if keys is not None:
                for t, r in enumerate(rows):
                    col_keys[r] = keys[b][t]
        return EncoderMemory(
            rows=x,
            rows_t=T.transpose(x),
            copy_t=T.transpose(T.tanh(x @ p["copy.w"])),
            init_state=init,
            mask=mask,
            keys=col_keys,
            lengths=lengths,
        )

    def encode(self, source_ids, rng=None, source_keys=None) -> EncoderMemory:
        keys = [list(source_keys)] if source_keys is not None else None
        return self.encode_batch([list(source_ids)], keys, rng)

    # -- decoder pieces --------------------------------------------------

    def attend(self, s, memory: EncoderMemory) -> AttentionResult:
        q = s @ self.params["attention.w"]
        scores = q @ memory.rows_t
        weights = T.softmax_rows(scores, memory.mask)
        context = weights @ memory.rows
        return AttentionResult(weights, context, scores)

    def generate_score(self, s, c) -> Tensor:
        return T.concat([s, c], axis=1) @ self.params["output.w"]

    def copy_score(self, memory: EncoderMemory, s) -> Tensor:
        return s @ memory.copy_t

    def initial_state(self, memory: EncoderMemory, bos_id: int) -> DecoderState:
        B = memory.batch_size
        H = self.config.hidden_dim
        return DecoderState(
            memory.init_state,
            Tensor(np.zeros((B, H))),
            bos_id,
            Tensor(np.zeros((B, 2 * H))),
        )

    def _step(self, memory, yproj, state, rng):
        """One decoder step; returns (score rows, new state, attention)."""
        cfg = self.config
        p = self.params
        if cfg.attention_state == "previous":
            att = self.attend(state.s, memory)
            feed = att.context
        else:
            feed = state.context
        gates = yproj + feed @ p["decoder.w_ic"] + state.s @ p["decoder.w_hh"]
        s, cell = _cell(gates, state.cell, cfg.hidden_dim)
        if cfg.attention_state == "current":
            att = self.attend(s, memory)
        s_out = T.dropout(s, cfg.dropout_rate, rng)
        gen = self.generate_score(s_out, att.context)
        if cfg.copy:
            scores = T.concat([gen, self.copy_score(memory, s_out)], axis=1)
        else:
            scores = gen
        return scores, DecoderState(s, cell, None, att.context), att

    def decode_step(self, state: DecoderState, memory: EncoderMemory, vocab=None):
        """Advance a single-instance decoder one step with dropout off.

        Returns (MixedDistribution, next state, attention); the caller sets
        ``prev_id`` on the returned state.
        """
        p = self.params
        emb = T.gather_rows(p["embedding"], [state.prev_id])
        yproj = emb @ p["decoder.w_ie"] + p["decoder.b"]
        scores, nxt, att = self._step(memory, yproj, state, None)
        return self.distribution(scores.data.reshape(-1), memory, vocab), nxt, att

    def distribution(self, scores, memory, vocab=None) -> MixedDistribution:
        n = self.n_outputs
        index = vocab.stoi if vocab is not None else None
        if not self.config.copy:
            return mixed_softmax(scores[:n], np.zeros(0), [], index)
        return mixed_softmax(scores[:n], scores[n:], memory.keys, index)

    # -- teacher forcing -------------------------------------------------

    def gold_mask(self, enc: EncodedInstance, vocab) -> np.ndarray:
        """Boolean (T_y, N [+ T_x]) mask of the events that produce each gold token.

        A word in V counts its generate event plus every source position with
        the same word; a word outside V only its copy positions; labels and
        EOS only their generate event.  Without copying, words outside V are
        generated as UNK.
        """
        n = self.n_outputs
        width = n + (len(enc.source_ids) if self.config.copy else 0)
        mask = np.zeros((len(enc.output_keys), width), dtype=bool)
        for t, key in enumerate(enc.output_keys):
            hits = []
            if self.config.copy and key != EOS and not is_bracket(key):
                hits = [j for j, k in enumerate(enc.source_keys) if k == key]
                mask[t, [n + j for j in hits]] = True
            if key in vocab.stoi:
                mask[t, vocab.stoi[key]] = True
            elif not hits:
                mask[t, vocab.unk_id] = True
        return mask

    def teacher_scores(self, batch, rng=None):
        """Score rows for every (step, instance) under teacher forcing.

        Returns (scores, memory, attention weights per step), where scores has
        ``Tmax * B`` rows in time-major order.
        """
        p = self.params
        B = len(batch)
        memory = self.encode_batch(
            [e.source_ids for e in batch], [e.source_keys for e in batch], rng
        )
        steps = max(len(e.input_ids) for e in batch)
        ids = _time_major([e.input_ids for e in batch], batch[0].output_ids[-1])
        y = T.gather_rows(p["embedding"], ids)
        y = T.dropout(y, self.config.dropout_rate, rng)
        yproj = y @ p["decoder.w_ie"] + p["decoder.b"]
        state = self.initial_state(memory, None)
        rows, attn = [], []
        for t in range(steps):
            scores, state, att = self._step(memory, yproj[t * B : (t + 1) * B], state, rng)
            rows.append(scores)
            attn.append(att.weights.data)
        return T.concat(rows, axis=0), memory, attn

    def batch_masks(self, batch, memory, vocab):
        """Normalizer mask, gold mask and loss weights for stacked score rows."""
        B = len(batch)
        n = self.n_outputs
        steps = max(len(e.output_keys) for e in batch)
        width = n + (len(memory) if self.config.copy else 0)
        valid = np.zeros((steps * B, width), dtype=bool)
        gold = np.zeros_like(valid)
        weight = np.zeros(steps * B)
        for b, enc in enumerate(batch):
            own = np.ones(width, dtype=bool)
            cols = np.arange(n)
            if self.config.copy:
                own[n:] = memory.mask[b]
                rows = np.array(memory.instance_rows(b), dtype=np.int64)
                cols = np.concatenate([cols, n + rows])
            single = self.gold_mask(enc, vocab)
            Ty = len(enc.output_keys)
            for t in range(steps):
                r = t * B + b
                valid[r] = own
                if t < Ty:
                    gold[r, cols] = single[t]
                    weight[r] = 1.0 / (Ty * B)
                else:
                    gold[r] = own
        return valid, gold, weight

    def batch_loss(self, batch, vocab, rng=None) -> Tensor:
        """Mean over instances of each instance's mean per-token NLL."""
        scores, memory, _ = self.teacher_scores(batch, rng)
        valid, gold, weight = self.batch_masks(batch, memory, vocab)
        log_z = T.logsumexp_rows(scores, valid)
        log_gold = T.logsumexp_rows(scores, gold)
        return T.total(T.mul(log_z - log_gold, Tensor(weight)))

    def sequence_loss(self, enc: EncodedInstance, vocab, rng=None) -> Tensor:
        return self.batch_loss([enc], vocab, rng)


def _cell(gates, c_prev, H):
    sig = T.sigmoid(gates[:, : 3 * H])
    g = T.tanh(gates[:, 3 * H :])
    i = sig[:, :H]
    f = sig[:, H : 2 * H]
    o = sig[:, 2 * H :]
    c = i * g if c_prev is None else f * c_prev + i * g
    h = o * T.tanh(c)
    return h, c


def candidate_probs(dist: MixedDistribution, vocab, mask_ids=()):
    """Aggregate a mixed distribution into extended-vocabulary candidates.

    Candidates ``0..N-1`` are V and L; source words outside V follow in order
    of first appearance.  Returns (probabilities, out-of-vocabulary keys);
    masked candidates get probability -1 so they never win an argmax.
    """
    probs = dist.generate.copy()
    oov, extra = [], []
    slot = {}
    for p, key in zip(dist.copy, dist.source_keys):
        if key in vocab.stoi:
            probs[vocab.stoi[key]] += p
        else:
            if key not in slot:
                slot[key] = len(oov)
                oov.append(key)
                extra.append(0.0)
            extra[slot[key]] += p
    probs = np.concatenate([probs, np.array(extra)])
    for i in mask_ids:
        probs[i] = -1.0
    return probs, oov


def decoding_mask(vocab):
    """Ids never emitted by the decoder."""
    return [vocab.stoi[PRED], vocab.stoi[BOS]]
