"""Word vocabulary V and bracket-label inventory L sharing one id space."""

from __future__ import annotations

import hashlib
from pathlib import Path

from .linearize import BOS, EOS, OPEN, PRED, SPECIALS, UNK, is_bracket


class Vocab:
    """Ids ``0..|V|-1`` are words (specials first), ``|V|..|V|+|L|-1`` labels."""

    def __init__(self, words, labels, counts=None):
        words = list(words)
        if list(words[: len(SPECIALS)]) != list(SPECIALS):
            words = list(SPECIALS) + [w for w in words if w not in SPECIALS]
        self.words = words
        self.labels = list(labels)
        self.itos = self.words + self.labels
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate entries in vocabulary")
        self.counts = dict(counts or {})

    def __len__(self):
        return len(self.itos)

    def __contains__(self, tok):
        return tok in self.stoi

    @property
    def n_words(self):
        return len(self.words)

    @property
    def n_labels(self):
        return len(self.labels)

    unk_id = property(lambda self: self.stoi[UNK])
    pred_id = property(lambda self: self.stoi[PRED])
    bos_id = property(lambda self: self.stoi[BOS])
    eos_id = property(lambda self: self.stoi[EOS])

    def id(self, tok):
        return self.stoi.get(tok, self.stoi[UNK])

    def ids(self, toks):
        return [self.id(t) for t in toks]

    def is_word_id(self, i):
        return i < len(self.words)

    def digest(self) -> str:
        h = hashlib.sha256("\n".join(self.itos).encode("utf-8"))
        return h.hexdigest()

    def to_dict(self):
        return {"words": self.words, "labels": self.labels}

    @classmethod
    def from_dict(cls, d):
        return cls(d["words"], d["labels"])

    def save(self, directory):
        directory = Path(directory)
        with open(directory / "vocab.txt", "w", encoding="utf-8", newline="\n") as f:
            for w in self.words:
                f.write(f"{w}\t{self.counts.get(w, 0)}\n")
        with open(directory / "labels.txt", "w", encoding="utf-8", newline="\n") as f:
            for label in self.labels:
                f.write(label + "\n")

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        words, counts = [], {}
        for line in (directory / "vocab.txt").read_text(encoding="utf-8").splitlines():
            w, c = line.split("\t")
            words.append(w)
            counts[w] = int(c)
        labels = (directory / "labels.txt").read_text(encoding="utf-8").splitlines()
        return cls(words, labels, counts)


def order_labels(labels):
    """Opening bracket first, closing brackets sorted."""
    closes = sorted(t for t in labels if t != OPEN and is_bracket(t))
    return [OPEN] + closes
