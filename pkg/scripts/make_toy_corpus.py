#!/usr/bin/env python3
"""Regenerate the bundled toy props corpus.

    python scripts/make_toy_corpus.py > src/s2srl/data/toy.props

Sentences come from a handful of hand-written templates filled from small
lexicons with a fixed seed, so the output is stable across runs.
"""

import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from s2srl.corpus import AnnotatedSentence, LabeledSpan, Predicate, write_props  # noqa: E402

SUBJECTS = ["bank", "firm", "trader", "government"]
OBJECTS = ["shares", "bonds", "loan", "deal"]
PAST = [("sold", "sell"), ("bought", "buy"), ("signed", "sign")]
BASE = [("sell", "sell"), ("buy", "buy"), ("sign", "sign")]
TIMES = [["yesterday"], ["last", "week"]]
PLACES = ["london", "tokyo"]
MANNERS = ["quickly", "slowly"]
RARE = ["acme", "zenith", "globex", "initech", "hooli", "vandelay"]


class Builder:
    """Accumulates tokens and per-predicate spans."""

    def __init__(self):
        self.tokens = []

    def add(self, *words):
        start = len(self.tokens)
        self.tokens.extend(words)
        return start, len(self.tokens) - 1


def np_(b, rng, nouns, rare=0.0):
    if rare and rng.random() < rare:
        return b.add(rng.choice(RARE).capitalize())
    return b.add("the", rng.choice(nouns))


def simple_past(rng):
    b = Builder()
    a0 = np_(b, rng, SUBJECTS, rare=0.15)
    verb, lemma = rng.choice(PAST)
    v = b.add(verb)
    a1 = np_(b, rng, OBJECTS)
    tmp = b.add(*rng.choice(TIMES))
    b.add(".")
    spans = [(a0, "A0"), (v, "V"), (a1, "A1"), (tmp, "AM-TMP")]
    return b.tokens, [(v[0], lemma, spans)]


def modal_negated(rng):
    b = Builder()
    a0 = np_(b, rng, SUBJECTS)
    mod = b.add("will")
    neg = b.add("not") if rng.random() < 0.5 else None
    verb, lemma = rng.choice(BASE)
    v = b.add(verb)
    a1 = np_(b, rng, OBJECTS)
    b.add(".")
    spans = [(a0, "A0"), (mod, "AM-MOD"), (v, "V"), (a1, "A1")]
    if neg:
        spans.append((neg, "AM-NEG"))
    return b.tokens, [(v[0], lemma, spans)]


def ditransitive(rng):
    b = Builder()
    a0 = np_(b, rng, SUBJECTS)
    v = b.add("gave")
    a2 = np_(b, rng, SUBJECTS)
    a1 = b.add("a", rng.choice(["loan", "deal"]))
    b.add(".")
    return b.tokens, [(v[0], "give", [(a0, "A0"), (v, "V"), (a2, "A2"), (a1, "A1")])]


def reported(rng):
    b = Builder()
    a0 = np_(b, rng, SUBJECTS, rare=0.2)
    said = b.add("said")
    inner_a0 = np_(b, rng, SUBJECTS)
    verb, lemma = rng.choice(PAST)
    v = b.add(verb)
    a1 = np_(b, rng, OBJECTS)
    loc = b.add("in", rng.choice(PLACES))
    b.add(".")
    outer = [(a0, "A0"), (said, "V"), ((inner_a0[0], loc[1]), "A1")]
    inner = [(inner_a0, "A0"), (v, "V"), (a1, "A1"), (loc, "AM-LOC")]
    return b.tokens, [(said[0], "say", outer), (v[0], lemma, inner)]


def fronted(rng):
    b = Builder()
    tmp = b.add(*rng.choice(TIMES))
    b.add(",")
    a0 = np_(b, rng, SUBJECTS)
    verb, lemma = rng.choice(PAST)
    v = b.add(verb)
    a1 = np_(b, rng, OBJECTS)
    mnr = b.add(rng.choice(MANNERS))
    b.add(".")
    spans = [(tmp, "AM-TMP"), (a0, "A0"), (v, "V"), (a1, "A1"), (mnr, "AM-MNR")]
    return b.tokens, [(v[0], lemma, spans)]


def rising(rng):
    b = Builder()
    a1 = np_(b, rng, OBJECTS)
    verb, lemma = rng.choice([("rose", "rise"), ("fell", "fall")])
    v = b.add(verb)
    a2 = b.add(rng.choice(["5", "10"]), "%")
    tmp = b.add(*rng.choice(TIMES))
    b.add(".")
    return b.tokens, [(v[0], lemma, [(a1, "A1"), (v, "V"), (a2, "A2"), (tmp, "AM-TMP")])]


def relative(rng):
    b = Builder()
    head = np_(b, rng, SUBJECTS)
    rel = b.add("who")
    verb, lemma = rng.choice(PAST)
    v = b.add(verb)
    a1 = np_(b, rng, OBJECTS)
    left = b.add("left")
    tmp = b.add(rng.choice(["early", "late"]))
    b.add(".")
    inner = [(head, "A0"), (rel, "R-A0"), (v, "V"), (a1, "A1")]
    outer = [((head[0], a1[1]), "A0"), (left, "V"), (tmp, "AM-TMP")]
    return b.tokens, [(v[0], lemma, inner), (left[0], "leave", outer)]


def hedged(rng):
    b = Builder()
    adv = b.add("however")
    b.add(",")
    a0 = np_(b, rng, SUBJECTS)
    verb, lemma = rng.choice(PAST)
    v = b.add(verb)
    a1 = np_(b, rng, OBJECTS)
    cau = b.add("because", "of", "the", rng.choice(["rates", "crisis"]))
    b.add(".")
    spans = [(adv, "AM-ADV"), (a0, "A0"), (v, "V"), (a1, "A1"), (cau, "AM-CAU")]
    return b.tokens, [(v[0], lemma, spans)]


def expects(rng):
    b = Builder()
    a0 = np_(b, rng, SUBJECTS)
    exp = b.add("expects")
    inner_a0 = np_(b, rng, SUBJECTS)
    b.add("to")
    verb, lemma = rng.choice(BASE)
    v = b.add(verb)
    a1 = np_(b, rng, OBJECTS)
    b.add(".")
    outer = [(a0, "A0"), (exp, "V"), ((inner_a0[0], a1[1]), "A1")]
    inner = [(inner_a0, "A0"), (v, "V"), (a1, "A1")]
    return b.tokens, [(exp[0], "expect", outer), (v[0], lemma, inner)]


TABLE2 = (
    "The trade figures turn out well , and all those recently unloaded bonds spurt in price .".split(),
    [
        (3, "turn", [((0, 2), "A1"), ((3, 4), "V"), ((5, 5), "A2")]),
        (11, "unload", [((10, 10), "AM-TMP"), ((11, 11), "V"), ((12, 12), "A1")]),
        (13, "spurt", [((8, 12), "A1"), ((13, 13), "V"), ((14, 15), "AM-ADV")]),
    ],
)

TEMPLATES = [simple_past, modal_negated, ditransitive, reported, fronted, rising, relative,
             hedged, expects]


def build(tokens, preds):
    tokens = list(tokens)
    tokens[0] = tokens[0][0].upper() + tokens[0][1:]
    predicates = []
    for idx, lemma, spans in sorted(preds):
        predicates.append(
            Predicate(idx, lemma, sorted(LabeledSpan(s, e, r) for (s, e), r in spans))
        )
    sent = AnnotatedSentence(tokens, predicates)
    sent.validate()
    return sent


def main(n_sentences=60, seed=7):
    rng = random.Random(seed)
    sentences = [build(*TABLE2)]
    while len(sentences) < n_sentences:
        template = TEMPLATES[(len(sentences) - 1) % len(TEMPLATES)]
        sentences.append(build(*template(rng)))
    sys.stdout.write(write_props(sentences))


if __name__ == "__main__":
    main()
