"""Reader and writer for the CoNLL-2005-style props column format.

One token per line, sentences separated by a blank line::

    The      -      (A1*    *
    trade    -      *       *
    figures  -      *)      *
    turn     turn   (V*     *
    ...

Column 1 is the word, column 2 the predicate lemma or ``-``, and every
further column holds the argument brackets of one predicate, in the order the
predicates appear in column 2.  The writer emits tab-separated columns and a
blank line after every sentence; that is the canonical form which round-trips
byte for byte.  The grammar is in ``docs/props_format.ebnf``.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from pathlib import Path

_CELL = re.compile(r"^(?:\(([^()*\s]+))?\*(\))?$")


class PropsParseError(ValueError):
    def __init__(self, message, lineno=None, source=None):
        self.lineno = lineno
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:{lineno}: " if lineno is not None else f"{source}: "
        elif lineno is not None:
            where = f"line {lineno}: "
        super().__init__(where + message)


class ContractError(ValueError):
    """A value violates the documented invariants of a domain type."""


@dataclass(frozen=True, order=True)
class LabeledSpan:
    start: int
    end: int
    role: str

    def __post_init__(self):
        if not self.role or re.search(r"[\s()]", self.role):
            raise ContractError(f"bad role label {self.role!r}")


@dataclass
class Predicate:
    index: int
    lemma: str
    spans: list[LabeledSpan] = field(default_factory=list)

    @property
    def arguments(self):
        return [s for s in self.spans if s.role != "V"]


@dataclass
class AnnotatedSentence:
    tokens: list[str]
    predicates: list[Predicate] = field(default_factory=list)

    def validate(self):
        n = len(self.tokens)
        seen = set()
        for k, pred in enumerate(self.predicates):
            if not 0 <= pred.index < n:
                raise ContractError(f"predicate {k} index {pred.index} outside sentence of {n}")
            if pred.index in seen:
                raise ContractError(f"two predicates at token {pred.index}")
            seen.add(pred.index)
            spans = sorted(pred.spans)
            for s in spans:
                if not 0 <= s.start <= s.end < n:
                    raise ContractError(f"span {s} outside sentence of {n} tokens")
            for a, b in zip(spans, spans[1:]):
                if b.start <= a.end:
                    raise ContractError(f"overlapping spans {a} and {b} for predicate {k}")
            verbs = [s for s in spans if s.role == "V"]
            if len(verbs) != 1 or not verbs[0].start <= pred.index <= verbs[0].end:
                raise ContractError(
                    f"predicate {k} at token {pred.index} needs exactly one V span covering it"
                )
        if [p.index for p in self.predicates] != sorted(seen):
            raise ContractError("predicates must be ordered by token position")


def _span_column(cells, first_lineno, source):
    spans = []
    open_role = open_start = None
    for i, cell in enumerate(cells):
        m = _CELL.match(cell)
        if not m:
            raise PropsParseError(f"malformed span cell {cell!r}", first_lineno + i, source)
        role, close = m.group(1), m.group(2)
        if role is not None:
            if open_role is not None:
                raise PropsParseError(
                    f"span ({role} opens inside unclosed ({open_role}", first_lineno + i, source
                )
            open_role, open_start = role, i
        if close:
            if open_role is None:
                raise PropsParseError("closing bracket without an open span", first_lineno + i, source)
            spans.append(LabeledSpan(open_start, i, open_role))
            open_role = None
    if open_role is not None:
        raise PropsParseError(
            f"span ({open_role} never closed", first_lineno + len(cells) - 1, source
        )
    return spans


def _parse_sentence(rows, source):
    first = rows[0][0]
    width = len(rows[0][1])
    for lineno, cols in rows:
        if len(cols) != width:
            raise PropsParseError(
                f"expected {width} columns, found {len(cols)}", lineno, source
            )
    if width < 2:
        raise PropsParseError("need at least word and predicate columns", first, source)
    tokens = [cols[0] for _, cols in rows]
    pred_rows = [i for i, (_, cols) in enumerate(rows) if cols[1] != "-"]
    if len(pred_rows) != width - 2:
        raise PropsParseError(
            f"{len(pred_rows)} predicates but {width - 2} span columns", first, source
        )
    predicates = []
    for k, idx in enumerate(pred_rows):
        spans = _span_column([cols[2 + k] for _, cols in rows], first, source)
        predicates.append(Predicate(idx, rows[idx][1][1], spans))
    sent = AnnotatedSentence(tokens, predicates)
    try:
        sent.validate()
    except ContractError as exc:
        raise PropsParseError(str(exc), first, source) from None
    return sent


def read_props(text, source=None) -> list[AnnotatedSentence]:
    """Parse props text (a string or readable stream) into sentences."""
    if not isinstance(text, str):
        text = text.read()
    sentences = []
    rows = []
    for lineno, line in enumerate(text.split("\n"), 1):
        cols = line.split()
        if not cols:
            if rows:
                sentences.append(_parse_sentence(rows, source))
                rows = []
            continue
        rows.append((lineno, cols))
    if rows:
        sentences.append(_parse_sentence(rows, source))
    return sentences


def _cells(pred, n):
    cells = ["*"] * n
    for s in pred.spans:
        if s.start == s.end:
            cells[s.start] = f"({s.role}*)"
        else:
            cells[s.start] = f"({s.role}*"
            cells[s.end] = "*)"
    return cells


def write_props(sentences) -> str:
    """Render sentences in canonical props form."""
    out = io.StringIO()
    for sent in sentences:
        sent.validate()
        n = len(sent.tokens)
        lemmas = ["-"] * n
        for p in sent.predicates:
            lemmas[p.index] = p.lemma
        columns = [_cells(p, n) for p in sent.predicates]
        for i, tok in enumerate(sent.tokens):
            out.write("\t".join([tok, lemmas[i]] + [c[i] for c in columns]))
            out.write("\n")
        out.write("\n")
    return out.getvalue()


def load_props(path) -> list[AnnotatedSentence]:
    path = Path(path)
    return read_props(path.read_text(encoding="utf-8"), source=str(path))


def save_props(sentences, path):
    Path(path).write_text(write_props(sentences), encoding="utf-8", newline="\n")
