"""Greedy inference, rare-word recovery and conversion back to props."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .corpus import AnnotatedSentence, ContractError, LabeledSpan, Predicate
from .linearize import EOS, UNK, Instance, delinearize
from .model import (
    Seq2SeqModel,
    candidate_probs,
    decoding_mask,
    encode_instance,
    mixed_softmax,
)

GENERATE = "generate"
COPY = "copy"


@dataclass
class DecodeResult:
    tokens: list[str]
    modes: list[str]
    positions: list
    origin: tuple = (0, 0)
    comparable: bool = False
    repairs: int = 0
    attention: list = field(default_factory=list, repr=False, compare=False)

    def to_json(self):
        d = asdict(self)
        d.pop("attention")
        d["origin"] = list(self.origin)
        return d


def max_decode_len(source_len: int) -> int:
    return 2 * source_len + 10


def greedy_decode(model: Seq2SeqModel, vocab, instance: Instance, max_len=None) -> DecodeResult:
    """Argmax decoding over the extended vocabulary until EOS or the length cap.

    Ties go to the lowest extended-vocabulary index.  A word emitted through
    copying records the highest-scoring source position holding that word.
    """
    keys = instance.original_source()
    ids = vocab.ids(instance.source)
    cap = max_decode_len(len(ids)) if max_len is None else max_len
    mask_ids = decoding_mask(vocab)
    n = model.n_outputs
    tokens, modes, positions, attn = [], [], [], []
    with T.no_grad():
        memory = model.encode(ids, None, keys)
        state = model.initial_state(memory, vocab.bos_id)
        for _ in range(cap):
            dist, state, att = model.decode_step(state, memory, vocab)
            attn.append(att.weights.data.reshape(-1).copy())
            probs, oov = candidate_probs(dist, vocab, mask_ids)
            k = int(np.argmax(probs))
            if k < n:
                token = vocab.itos[k]
                next_id = k
                gen = dist.generate[k]
            else:
                token = UNK
                next_id = vocab.unk_id
                gen = 0.0
            key = token if k < n else oov[k - n]
            hits = [j for j, s in enumerate(dist.source_keys) if s == key]
            if token == EOS:
                break
            copy_mass = float(sum(dist.copy[j] for j in hits))
            if hits and copy_mass > gen:
                modes.append(COPY)
                positions.append(max(hits, key=lambda j: (dist.copy[j], -j)))
            else:
                modes.append(GENERATE)
                positions.append(None)
            tokens.append(token)
            state.prev_id = next_id
    result = DecodeResult(tokens, modes, positions, tuple(instance.origin), attention=attn)
    recovered = recover_rare_words(result, instance.unk_map)
    d = delinearize(recovered, keys)
    result.comparable = d.comparable
    result.repairs = d.repairs
    return result


def recover_rare_words(result: DecodeResult, unk_map) -> list[str]:
    """Replace copied UNKs by the source word recorded at the copied position."""
    originals = dict((int(p), w) for p, w in unk_map)
    out = []
    for tok, mode, pos in zip(result.tokens, result.modes, result.positions):
        if tok == UNK and mode == COPY and pos in originals:
            out.append(originals[pos])
        else:
            out.append(tok)
    return out


def _sanitize(spans, pred_index):
    """Force a valid per-predicate structure: one V over the predicate, no overlaps."""
    verbs = [s for s in spans if s.role == "V" and s.start <= pred_index <= s.end]
    verb = verbs[0] if verbs else LabeledSpan(pred_index, pred_index, "V")
    kept = [verb]
    for s in sorted(spans, key=lambda s: (s.start, -s.end)):
        if s.role == "V":
            continue
        if any(s.start <= k.end and k.start <= s.end for k in kept):
            continue
        kept.append(s)
    return sorted(kept)


def to_conll(sentences, results):
    """Merge per-predicate outputs back into multi-column sentences.

    ``sentences`` are the gold skeletons (tokens, predicate positions, lemmas)
    and ``results`` are ``Decoded`` targets tagged with their (sentence id,
    predicate id) origin.  A non-comparable output keeps only its V span.
    Returns (annotated sentences, comparability flags per sentence).
    """
    by_origin = {}
    for r in results:
        origin = tuple(r.origin)
        if origin in by_origin:
            raise ContractError(f"duplicate result for sentence/predicate {origin}")
        by_origin[origin] = r
    expected = {(s, k) for s, sent in enumerate(sentences) for k in range(len(sent.predicates))}
    if set(by_origin) != expected:
        missing = sorted(expected - set(by_origin))
        extra = sorted(set(by_origin) - expected)
        raise ContractError(f"result bookkeeping mismatch: missing {missing[:5]}, extra {extra[:5]}")
    out, flags = [], []
    for s, sent in enumerate(sentences):
        words = [t.lower() for t in sent.tokens]
        preds, sent_flags = [], []
        for k, gold in enumerate(sent.predicates):
            r = by_origin[(s, k)]
            d = delinearize(r.tokens, words)
            spans = _sanitize(d.spans, gold.index) if d.comparable else _sanitize([], gold.index)
            preds.append(Predicate(gold.index, gold.lemma, spans))
            sent_flags.append(d.comparable)
        out.append(AnnotatedSentence(list(sent.tokens), preds))
        flags.append(sent_flags)
    return out, flags


@dataclass
class Decoded:
    """A recovered target sequence tagged with its origin, as ``to_conll`` expects."""

    origin: tuple
    tokens: list[str]


def recovered_outputs(results, instances):
    out = []
    for r, inst in zip(results, instances):
        out.append(Decoded(tuple(r.origin), recover_rare_words(r, inst.unk_map)))
    return out


def gold_outputs(instances):
    """Gold targets (rare words restored) in the shape ``to_conll`` consumes."""
    return [Decoded(tuple(i.origin), i.original_target()) for i in instances]


def teacher_forced_accuracy(model: Seq2SeqModel, vocab, instances, batch_size=16) -> float:
    """Share of gold target steps (EOS included) whose argmax candidate is gold."""
    encs = [encode_instance(i, vocab) for i in instances]
    mask_ids = decoding_mask(vocab)
    n = model.n_outputs
    right = total = 0
    with T.no_grad():
        for lo in range(0, len(encs), batch_size):
            batch = encs[lo : lo + batch_size]
            scores, memory, _ = model.teacher_scores(batch)
            B = len(batch)
            for b, enc in enumerate(batch):
                rows = memory.instance_rows(b)
                for t, key in enumerate(enc.output_keys):
                    row = scores.data[t * B + b]
                    cop = row[n:][rows] if model.config.copy else np.zeros(0)
                    keys = enc.source_keys if model.config.copy else []
                    dist = mixed_softmax(row[:n], cop, keys)
                    probs, oov = candidate_probs(dist, vocab, mask_ids)
                    right += int(np.argmax(probs) == _gold_candidate(key, vocab, oov, model))
                    total += 1
    return right / total if total else 0.0


def _gold_candidate(key, vocab, oov, model):
    if key in vocab.stoi:
        return vocab.stoi[key]
    if model.config.copy and key in oov:
        return model.n_outputs + oov.index(key)
    return vocab.unk_id


def decode_all(model, vocab, instances):
    return [greedy_decode(model, vocab, inst) for inst in instances]


__all__ = [
    "COPY",
    "GENERATE",
    "DecodeResult",
    "Decoded",
    "decode_all",
    "gold_outputs",
    "greedy_decode",
    "max_decode_len",
    "recover_rare_words",
    "recovered_outputs",
    "teacher_forced_accuracy",
    "to_conll",
]
