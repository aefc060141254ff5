"""Benchmark report figures, rendered to files next to the CSV/JSON output."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_PNG_METADATA = {"Software": "lexmdp"}


def render_benchmark_figures(report, out_dir: str | Path) -> list[Path]:
    """Ratio histogram and length-vs-distance scatter; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    solved = [r for r in report.records if r.ratio is not None]
    written = []

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if solved:
        log_ratios = [math.log10(max(float(r.ratio), 1.0)) for r in solved]
        top = max(log_ratios + [3.2])
        ax.hist(log_ratios, bins=24, range=(0.0, top), color="#4878a8",
                edgecolor="white")
        for mark, style in ((math.log10(2), ":"), (1.0, "--"), (3.0, "-.")):
            ax.axvline(mark, color="#a84848", linestyle=style, linewidth=1)
    ax.set_xlabel("log10(baseline length / distance-optimal length)")
    ax.set_ylabel("layouts")
    ax.set_title("How much longer the careless optimal strategy takes")
    fig.tight_layout()
    hist_path = out_dir / "ratio_histogram.png"
    fig.savefig(hist_path, dpi=130, metadata=_PNG_METADATA)
    plt.close(fig)
    written.append(hist_path)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    finite = [r for r in solved if r.shortest_distance != math.inf]
    if finite:
        xs = [r.shortest_distance for r in finite]
        ax.scatter(xs, [float(r.v_distopt) for r in finite], s=18,
                   color="#2e7d32", label="length-optimal")
        ax.scatter(xs, [float(r.v_baseline_rand) for r in finite], s=18,
                   color="#c62828", marker="x", label="baseline (random ties)")
        ax.set_yscale("log")
        ax.legend()
    ax.set_xlabel("shortest path length (ignoring slips)")
    ax.set_ylabel("conditional expected steps")
    ax.set_title("Expected steps to target per layout")
    fig.tight_layout()
    scatter_path = out_dir / "length_scatter.png"
    fig.savefig(scatter_path, dpi=130, metadata=_PNG_METADATA)
    plt.close(fig)
    written.append(scatter_path)
    return written
