"""Conversion between annotated sentences and bracketed token sequences.

For one chosen predicate the source is the lowercased sentence with ``<pred>``
placed right before the first token of the V span, and the target is the
lowercased sentence with every labeled span wrapped as ``(#`` ... ``p0:role)``::

    source: the trade figures <pred> turn out well , ...
    target: (# the trade figures p0:a1) (# turn out p0:v) (# well p0:a2) , ...
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field, replace

from .corpus import AnnotatedSentence, ContractError, LabeledSpan

PRED = "<pred>"
UNK = "<unk>"
BOS = "<bos>"
EOS = "<eos>"
OPEN = "(#"
SPECIALS = (UNK, PRED, BOS, EOS)

_CLOSE = re.compile(r"^p0:(\S+)\)$")


def close_token(role: str) -> str:
    return f"p0:{role.lower()})"


def is_close(tok: str) -> bool:
    return _CLOSE.match(tok) is not None


def is_bracket(tok: str) -> bool:
    return tok == OPEN or is_close(tok)


def close_role(tok: str) -> str:
    m = _CLOSE.match(tok)
    if m is None:
        raise ValueError(f"not a closing bracket: {tok!r}")
    return m.group(1).upper()


@dataclass
class Instance:
    source: list[str]
    target: list[str]
    unk_map: list[tuple[int, str]] = field(default_factory=list)
    origin: tuple[int, int] = (0, 0)

    @property
    def pred_position(self) -> int:
        return self.source.index(PRED)

    def original_source(self) -> list[str]:
        """Source with UNK-replaced words restored."""
        src = list(self.source)
        for pos, word in self.unk_map:
            src[pos] = word
        return src

    def original_target(self) -> list[str]:
        """Target with UNK-replaced words restored via source alignment."""
        words = [w for w in self.original_source() if w != PRED]
        out, k = [], 0
        for tok in self.target:
            if is_bracket(tok):
                out.append(tok)
            else:
                out.append(words[k])
                k += 1
        return out


@dataclass
class Delinearized:
    words: list[str]
    spans: list[LabeledSpan]
    comparable: bool
    repairs: int = 0

    def __iter__(self):
        return iter((self.words, self.spans, self.comparable))


def expand_predicates(sentence: AnnotatedSentence):
    """One (sentence, predicate id) pair per predicate."""
    return [(sentence, k) for k in range(len(sentence.predicates))]


def linearize(sentence: AnnotatedSentence, pred_id: int, sent_id: int = 0) -> Instance:
    if not 0 <= pred_id < len(sentence.predicates):
        raise ContractError(f"predicate id {pred_id} out of range")
    sentence.validate()
    pred = sentence.predicates[pred_id]
    words = [t.lower() for t in sentence.tokens]
    verb = next(s for s in pred.spans if s.role == "V")

    source = words[: verb.start] + [PRED] + words[verb.start :]

    opens = Counter(s.start for s in pred.spans)
    closes = {s.end: s.role for s in pred.spans}
    target = []
    for i, w in enumerate(words):
        target.extend([OPEN] * opens[i])
        target.append(w)
        if i in closes:
            target.append(close_token(closes[i]))
    return Instance(source, target, [], (sent_id, pred_id))


def delinearize(target, source) -> Delinearized:
    """Recover words and spans from a (possibly malformed) target sequence.

    Unmatched closing brackets and unmatched or empty opens are dropped; each
    drop counts as one repair.  ``comparable`` holds when the recovered words
    equal the source words with ``<pred>`` removed.
    """
    words = []
    spans = []
    stack = []
    repairs = 0
    for tok in target:
        if tok == OPEN:
            stack.append(len(words))
        elif is_close(tok):
            if not stack:
                repairs += 1
                continue
            start = stack.pop()
            if start == len(words):
                repairs += 1
                continue
            spans.append(LabeledSpan(start, len(words) - 1, close_role(tok)))
        elif tok == PRED:
            continue
        else:
            words.append(tok)
    repairs += len(stack)
    expected = [w for w in source if w != PRED]
    spans.sort()
    return Delinearized(words, spans, words == expected, repairs)


def _mask(instance: Instance, rare) -> Instance:
    source = list(instance.source)
    unk_map = []
    for pos, w in enumerate(source):
        if w != PRED and rare(w):
            unk_map.append((pos, w))
            source[pos] = UNK
    target = [UNK if not is_bracket(t) and rare(t) else t for t in instance.target]
    return replace(instance, source=source, target=target, unk_map=unk_map)


def apply_unk(instance: Instance, counts, threshold: int, covered=None) -> Instance:
    """Replace words seen fewer than ``threshold`` times (or not covered) by UNK."""

    def rare(w):
        if counts.get(w, 0) < threshold:
            return True
        return covered is not None and w not in covered

    return _mask(instance, rare)


def apply_vocab(instance: Instance, words) -> Instance:
    """Replace every word outside ``words`` by UNK."""
    words = set(words)
    return _mask(instance, lambda w: w not in words)


def labels_of(target) -> set[str]:
    return {t for t in target if is_bracket(t)}
