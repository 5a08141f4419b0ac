"""Span-level precision/recall/F1, reproduction rates and oracle bounds."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .corpus import ContractError


@dataclass
class Counts:
    correct: int = 0
    predicted: int = 0
    gold: int = 0

    def __iadd__(self, other):
        self.correct += other.correct
        self.predicted += other.predicted
        self.gold += other.gold
        return self

    @property
    def precision(self) -> float:
        return 100.0 * self.correct / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return 100.0 * self.correct / self.gold if self.gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def to_dict(self):
        return {
            "correct": self.correct,
            "predicted": self.predicted,
            "gold": self.gold,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


@dataclass
class ScoreReport:
    counts: Counts
    verb: Counts
    per_label: dict
    oracle_min_f1: float
    oracle_max_f1: float
    same_length_rate: float | None = None
    balanced_bracket_rate: float | None = None
    structures: int = 0
    comparable: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def precision(self):
        return self.counts.precision

    @property
    def recall(self):
        return self.counts.recall

    @property
    def f1(self):
        return self.counts.f1

    def to_dict(self):
        return {
            "meta": self.meta,
            "overall": self.counts.to_dict(),
            "verb": self.verb.to_dict(),
            "per_label": {k: v.to_dict() for k, v in sorted(self.per_label.items())},
            "oracle_min_f1": self.oracle_min_f1,
            "oracle_max_f1": self.oracle_max_f1,
            "same_length_rate": self.same_length_rate,
            "balanced_bracket_rate": self.balanced_bracket_rate,
            "structures": self.structures,
            "comparable": self.comparable,
        }


def _args(spans):
    return {(s.start, s.end, s.role) for s in spans if s.role != "V"}


def _verbs(spans):
    return {(s.start, s.end, s.role) for s in spans if s.role == "V"}


def span_counts(predicted_spans, gold_spans) -> Counts:
    """Exact (start, end, role) matches over argument spans of one structure."""
    p, g = _args(predicted_spans), _args(gold_spans)
    return Counts(len(p & g), len(p), len(g))


def aligned_structures(predicted, gold, flags=None):
    """Yield (predicted spans, gold spans, comparable) per predicate structure."""
    if len(predicted) != len(gold):
        raise ContractError(f"sentence count mismatch: {len(predicted)} predicted vs {len(gold)} gold")
    for i, (ps, gs) in enumerate(zip(predicted, gold)):
        if len(ps.tokens) != len(gs.tokens):
            raise ContractError(f"sentence {i}: token count {len(ps.tokens)} vs {len(gs.tokens)}")
        if [p.index for p in ps.predicates] != [p.index for p in gs.predicates]:
            raise ContractError(f"sentence {i}: predicate positions differ")
        row = flags[i] if flags is not None else [True] * len(gs.predicates)
        if len(row) != len(gs.predicates):
            raise ContractError(f"sentence {i}: {len(row)} flags for {len(gs.predicates)} predicates")
        for pp, gp, ok in zip(ps.predicates, gs.predicates, row):
            yield pp.spans, gp.spans, bool(ok)


def oracle_bounds(predicted, gold, flags) -> tuple[float, float]:
    """Micro F1 with non-comparable structures counted as all wrong / all right."""
    low, high = Counts(), Counts()
    for ps, gs, ok in aligned_structures(predicted, gold, flags):
        if ok:
            c = span_counts(ps, gs)
            low += c
            high += c
        else:
            n_pred, n_gold = len(_args(ps)), len(_args(gs))
            low += Counts(0, n_pred, n_gold)
            high += Counts(n_gold, n_gold, n_gold)
    return low.f1, high.f1


def reproduction_stats(results) -> tuple[float, float]:
    """Percent of outputs that reproduce the source, and that needed no bracket repair."""
    results = list(results)
    if not results:
        return 0.0, 0.0
    same = sum(bool(r.comparable) for r in results)
    balanced = sum(r.repairs == 0 for r in results)
    return 100.0 * same / len(results), 100.0 * balanced / len(results)


def score(predicted, gold, flags=None, results=None) -> ScoreReport:
    """Micro-averaged argument scores over comparable structures.

    ``flags`` mirrors the predicate layout of ``gold`` and marks comparable
    outputs (all comparable when omitted); ``results`` are decode results
    used for the reproduction rates.
    """
    total, verb = Counts(), Counts()
    per_label = defaultdict(Counts)
    n = n_ok = 0
    for ps, gs, ok in aligned_structures(predicted, gold, flags):
        n += 1
        if not ok:
            continue
        n_ok += 1
        total += span_counts(ps, gs)
        pv, gv = _verbs(ps), _verbs(gs)
        verb += Counts(len(pv & gv), len(pv), len(gv))
        p, g = _args(ps), _args(gs)
        for role in {s[2] for s in p | g}:
            pr = {s for s in p if s[2] == role}
            gr = {s for s in g if s[2] == role}
            per_label[role] += Counts(len(pr & gr), len(pr), len(gr))
    low, high = oracle_bounds(predicted, gold, flags)
    same = balanced = None
    if results is not None:
        same, balanced = reproduction_stats(results)
    return ScoreReport(total, verb, dict(per_label), low, high, same, balanced, n, n_ok)


def format_report(report: ScoreReport) -> str:
    lines = [f"{'label':<12}{'corr':>7}{'pred':>7}{'gold':>7}{'prec':>9}{'rec':>9}{'F1':>9}"]

    def row(name, c):
        lines.append(
            f"{name:<12}{c.correct:>7}{c.predicted:>7}{c.gold:>7}"
            f"{c.precision:>9.2f}{c.recall:>9.2f}{c.f1:>9.2f}"
        )

    row("overall", report.counts)
    lines.append("-" * len(lines[0]))
    for name in sorted(report.per_label):
        row(name, report.per_label[name])
    lines.append("-" * len(lines[0]))
    row("V", report.verb)
    lines.append(f"structures {report.structures}, comparable {report.comparable}")
    lines.append(f"oracle-min F1 {report.oracle_min_f1:.2f}, oracle-max F1 {report.oracle_max_f1:.2f}")
    if report.same_length_rate is not None:
        lines.append(
            f"same length {report.same_length_rate:.2f}%, "
            f"balanced brackets {report.balanced_bracket_rate:.2f}%"
        )
    return "\n".join(lines)
