"""Static SVG figures for the analysis report.

Output is byte-stable: the SVG hash salt is fixed and no date is embedded.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 5.0
colors = ["#2b8cbe", "#e6550d", "#31a354", "#756bb1"]

params = {
    "axes.prop_cycle": matplotlib.cycler(color=colors),
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "font.family": "sans-serif",
    "font.sans-serif": ["DejaVu Sans"],
    "font.size": 8,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": [fig_width, fig_width * golden_mean],
    "svg.fonttype": "path",
    "svg.hashsalt": "s2srl",
    "path.simplify": False,
}


def figure(width=fig_width, height=None):
    height = height or width * golden_mean
    with matplotlib.rc_context(params):
        fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def save_svg(fig, path):
    with matplotlib.rc_context(params):
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def heatmap(matrix, labels, path, title=""):
    n = len(labels)
    size = max(4.0, 0.45 * n + 1.5)
    fig, ax = figure(size, size)
    with matplotlib.rc_context(params):
        data = np.array(matrix, dtype=float).reshape(n, n)
        im = ax.imshow(data, cmap="Blues", vmin=0, vmax=100)
        ax.set_xticks(range(n), labels, rotation=90)
        ax.set_yticks(range(n), labels)
        ax.set_xlabel("predicted")
        ax.set_ylabel("gold")
        for i in range(n):
            for j in range(n):
                if data[i, j] > 0:
                    color = "white" if data[i, j] > 50 else "black"
                    ax.text(j, i, f"{data[i, j]:.0f}", ha="center", va="center", color=color,
                            fontsize=6)
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        ax.set_title(title)
    return save_svg(fig, path)


def bars(categories, series, path, title="", ylabel="", ylim=None):
    """Grouped bar chart; ``series`` maps a legend name to one value per category."""
    fig, ax = figure()
    with matplotlib.rc_context(params):
        x = np.arange(len(categories))
        width = 0.8 / max(1, len(series))
        for k, (name, values) in enumerate(series.items()):
            ax.bar(x + (k - (len(series) - 1) / 2) * width, values, width, label=name)
        ax.set_xticks(x, categories)
        ax.set_ylabel(ylabel)
        if ylim is not None:
            ax.set_ylim(*ylim)
        if len(series) > 1:
            ax.legend(frameon=False)
        ax.set_title(title)
    return save_svg(fig, path)


SVG_FILES = ("confusion.svg", "arg_count.svg", "f1_by_length.svg", "f1_by_distance.svg",
             "error_by_position.svg")


def render_all(report, out_dir):
    out = Path(out_dir)
    paths = [
        heatmap(report.confusion, report.confusion_labels, out / "confusion.svg",
                "label confusion (row %)"),
    ]
    total = max(1, report.structures)
    paths.append(bars(
        ["0", "1", "2+"],
        {
            "missing": [100.0 * v / total for v in report.missing_histogram],
            "excess": [100.0 * v / total for v in report.excess_histogram],
        },
        out / "arg_count.svg", "missing and excess arguments", "% of structures", (0, 100),
    ))
    for name, curve, title in (
        ("f1_by_length.svg", report.f1_by_length, "F1 by linearized length"),
        ("f1_by_distance.svg", report.f1_by_distance, "F1 by distance to predicate"),
    ):
        paths.append(bars(list(curve), {"F1": [v["f1"] for v in curve.values()]},
                          out / name, title, "F1", (0, 100)))
    pos = report.error_by_position
    paths.append(bars(list(pos), {"error": [v["error_ratio"] for v in pos.values()]},
                      out / "error_by_position.svg", "error ratio by start position",
                      "error ratio", (0, 1)))
    return paths
