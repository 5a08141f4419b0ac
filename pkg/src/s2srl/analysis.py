"""Error analysis over comparable predicate structures.

Everything here works on argument spans only (V spans are skipped) and on
structures whose decoded output reproduced the source.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .scoring import Counts, aligned_structures

EXACT, PARTIAL, NO_OVERLAP = "exact", "partial", "none"
NONE = "NONE"
CORE_ROLES = frozenset(f"A{i}" for i in range(6))

# Linearized-length bins as (label, lower, upper), both ends inclusive.
LENGTH_BINS = (
    ("<=20", 0, 20),
    ("21-30", 21, 30),
    ("31-40", 31, 40),
    ("41-50", 41, 50),
    ("51-60", 51, 60),
    (">60", 61, None),
)
FIFTHS = ("0.0-0.2", "0.2-0.4", "0.4-0.6", "0.6-0.8", "0.8-1.0")
COUNT_BINS = ("0", "1", "2+")


@dataclass
class AnalysisReport:
    overlap_counts: dict
    confusion_labels: list
    confusion_counts: list
    confusion: list
    missing_histogram: list
    excess_histogram: list
    duplicate_rate: float
    f1_by_length: dict
    f1_by_distance: dict
    error_by_position: dict
    structures: int = 0
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "meta": self.meta,
            "structures": self.structures,
            "overlap_counts": self.overlap_counts,
            "confusion": {
                "labels": self.confusion_labels,
                "counts": self.confusion_counts,
                "percent": self.confusion,
            },
            "missing_histogram": dict(zip(COUNT_BINS, self.missing_histogram)),
            "excess_histogram": dict(zip(COUNT_BINS, self.excess_histogram)),
            "duplicate_rate": self.duplicate_rate,
            "f1_by_length": self.f1_by_length,
            "f1_by_distance": self.f1_by_distance,
            "error_by_position": self.error_by_position,
        }


def _args(spans):
    return [s for s in spans if s.role != "V"]


def span_overlap(predicted_spans, gold_spans) -> list[str]:
    """Overlap class of each predicted argument span against the gold spans."""
    gold = _args(gold_spans)
    bounds = {(g.start, g.end) for g in gold}
    out = []
    for s in _args(predicted_spans):
        if (s.start, s.end) in bounds:
            out.append(EXACT)
        elif any(s.start <= g.end and g.start <= s.end for g in gold):
            out.append(PARTIAL)
        else:
            out.append(NO_OVERLAP)
    return out


def confusion_pairs(predicted_spans, gold_spans):
    """(gold role, predicted role) pairs, with NONE standing in for a missing side.

    Spans pair up when their boundaries match exactly.  A gold span without a
    boundary match pairs with NONE, and so does a predicted span.
    """
    gold = {(g.start, g.end): g.role for g in _args(gold_spans)}
    pred = {(p.start, p.end): p.role for p in _args(predicted_spans)}
    pairs = []
    for key, role in gold.items():
        pairs.append((role, pred.get(key, NONE)))
    for key, role in pred.items():
        if key not in gold:
            pairs.append((NONE, role))
    return pairs


def confusion_matrix(pairs):
    """Return (labels, counts, row-normalized percents); NONE is the last label."""
    labels = sorted({r for pair in pairs for r in pair} - {NONE}) + [NONE]
    index = {r: i for i, r in enumerate(labels)}
    counts = [[0] * len(labels) for _ in labels]
    for g, p in pairs:
        counts[index[g]][index[p]] += 1
    percent = []
    for row in counts:
        n = sum(row)
        percent.append([100.0 * c / n if n else 0.0 for c in row])
    return labels, counts, percent


def _bin3(n):
    return min(n, 2)


def arg_count_diffs(structures):
    """Missing/excess histograms (0, 1, 2+) and the core-role duplicate rate."""
    missing, excess = [0, 0, 0], [0, 0, 0]
    dup = 0
    for ps, gs in structures:
        p = {(s.start, s.end, s.role) for s in _args(ps)}
        g = {(s.start, s.end, s.role) for s in _args(gs)}
        matched = len(p & g)
        missing[_bin3(len(g) - matched)] += 1
        excess[_bin3(len(p) - matched)] += 1
        roles = Counter(s.role for s in _args(ps) if s.role in CORE_ROLES)
        dup += any(c > 1 for c in roles.values())
    n = len(structures)
    return missing, excess, (dup / n if n else 0.0)


def length_bin(n: int) -> str:
    for label, lo, hi in LENGTH_BINS:
        if n >= lo and (hi is None or n <= hi):
            return label
    raise ValueError(f"negative length {n}")


def fifth(x: float) -> str:
    return FIFTHS[min(4, int(5 * x))]


def linearized_length(n_tokens, spans) -> int:
    return n_tokens + 2 * len(spans)


def _span_key(s):
    return (s.start, s.end, s.role)


def binned_curves(structures):
    """F1 by length and by predicate distance, and error ratio by position.

    ``structures`` holds (predicted spans, gold spans, sentence length,
    predicate index) tuples.  Bins with no spans are left out.
    """
    by_len = defaultdict(Counts)
    by_dist = defaultdict(Counts)
    pos = defaultdict(lambda: [0, 0])
    for ps, gs, n, idx in structures:
        p = {_span_key(s): s for s in _args(ps)}
        g = {_span_key(s): s for s in _args(gs)}
        by_len[length_bin(linearized_length(n, gs))] += Counts(len(p.keys() & g.keys()), len(p), len(g))

        def dist(s):
            return fifth(abs((s.start + s.end) / 2 - idx) / n)

        for k, s in p.items():
            by_dist[dist(s)] += Counts(int(k in g), 1, 0)
        for k, s in g.items():
            by_dist[dist(s)] += Counts(0, 0, 1)
        for k in p.keys() | g.keys():
            s = p.get(k) or g[k]
            cell = pos[fifth(s.start / n)]
            cell[0] += int(not (k in p and k in g))
            cell[1] += 1

    def curve(table, order):
        return {
            b: dict(table[b].to_dict(), spans=table[b].predicted + table[b].gold)
            for b in order
            if b in table and table[b].predicted + table[b].gold
        }

    length_curve = curve(by_len, [b[0] for b in LENGTH_BINS])
    distance_curve = curve(by_dist, FIFTHS)
    position_curve = {
        b: {"errors": pos[b][0], "spans": pos[b][1], "error_ratio": pos[b][0] / pos[b][1]}
        for b in FIFTHS
        if b in pos and pos[b][1]
    }
    return length_curve, distance_curve, position_curve


def analyze(predicted, gold, flags=None, meta=None) -> AnalysisReport:
    """Run every analysis over the comparable structures of aligned sentences."""
    items = []
    for ps, gs, ok in aligned_structures(predicted, gold, flags):
        if ok:
            items.append((ps, gs))
    lengths = [
        (len(g.tokens), gp.index)
        for g, row in zip(gold, flags or [[True] * len(g.predicates) for g in gold])
        for gp, ok in zip(g.predicates, row)
        if ok
    ]
    overlap = Counter({EXACT: 0, PARTIAL: 0, NO_OVERLAP: 0})
    pairs = []
    for ps, gs in items:
        overlap.update(span_overlap(ps, gs))
        pairs.extend(confusion_pairs(ps, gs))
    labels, counts, percent = confusion_matrix(pairs)
    missing, excess, dup = arg_count_diffs(items)
    curves = binned_curves([(ps, gs, n, idx) for (ps, gs), (n, idx) in zip(items, lengths)])
    return AnalysisReport(
        dict(overlap),
        labels,
        counts,
        percent,
        missing,
        excess,
        dup,
        *curves,
        structures=len(items),
        meta=meta or {},
    )


# -- output files --------------------------------------------------------------

CSV_FILES = ("confusion.csv", "arg_count.csv", "f1_by_length.csv", "f1_by_distance.csv",
             "error_by_position.csv")


def _csv(header, rows, meta):
    buf = io.StringIO()
    if meta:
        buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x):
    return f"{x:.4f}"


def report_tables(report: AnalysisReport):
    """CSV text per output file name."""
    meta = report.meta
    conf = [[g] + [_fmt(v) for v in row] for g, row in zip(report.confusion_labels, report.confusion)]
    counts = [
        [b, m, e] for b, m, e in zip(COUNT_BINS, report.missing_histogram, report.excess_histogram)
    ]

    def f1_rows(curve):
        return [
            [b, v["correct"], v["predicted"], v["gold"], _fmt(v["precision"]), _fmt(v["recall"]),
             _fmt(v["f1"])]
            for b, v in curve.items()
        ]

    f1_head = ["bin", "correct", "predicted", "gold", "precision", "recall", "f1"]
    pos = [[b, v["errors"], v["spans"], _fmt(v["error_ratio"])]
           for b, v in report.error_by_position.items()]
    return {
        "confusion.csv": _csv(["gold\\predicted"] + report.confusion_labels, conf, meta),
        "arg_count.csv": _csv(["bin", "missing", "excess"], counts, meta),
        "f1_by_length.csv": _csv(f1_head, f1_rows(report.f1_by_length), meta),
        "f1_by_distance.csv": _csv(f1_head, f1_rows(report.f1_by_distance), meta),
        "error_by_position.csv": _csv(["region", "errors", "spans", "error_ratio"], pos, meta),
    }


def write_report(report: AnalysisReport, out_dir) -> list[Path]:
    """Write analysis.json, five CSVs and five SVG figures; return the paths."""
    from . import plotting

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in report_tables(report).items():
        (out / name).write_text(text, encoding="utf-8")
        paths.append(out / name)
    paths.extend(plotting.render_all(report, out))
    (out / "analysis.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    paths.append(out / "analysis.json")
    return paths
