"""Matplotlib figure rendering for reports.

Everything here is opt-in from the CLI (--figures DIR); the JSON/TSV
outputs never depend on it. Uses the Agg backend so it works headless.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import CrossMatrix, RejectDecision, SelectiveReport
from .overlap import OverlapReport

_STYLE = {
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "grid.linewidth": 0.5,
}


def _save(fig, outdir: Path, stem: str) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / f"{stem}.png"
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def ratio_histogram(report: OverlapReport, outdir: str | Path) -> Path:
    """Histogram of per-point w/b ratios with the decision line at 1."""
    ratios = np.asarray([p.ratio for p in report.per_point], dtype=np.float64)
    finite = ratios[np.isfinite(ratios)]
    n_inf = int(ratios.size - finite.size)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        if finite.size:
            ax.hist(finite, bins=40, color="#4878a8", edgecolor="white", linewidth=0.4)
        ax.axvline(1.0, color="#c44e52", linestyle="--", linewidth=1.0, label="ratio = 1")
        title = f"p_a={report.p_a:.3f}  p_b={report.p_b:.3f}  O={report.o_bidirectional:.3f}"
        if n_inf:
            title += f"  (+{n_inf} inf)"
        ax.set_title(title)
        ax.set_xlabel("within-set / cross-set distance ratio")
        ax.set_ylabel("points")
        ax.legend(frameon=False)
        return _save(fig, Path(outdir), "overlap_ratios")


def decision_summary(
    report: SelectiveReport, decisions: Sequence[RejectDecision], outdir: str | Path
) -> Path:
    """Accept/reject breakdown by reason next to the selective scores."""
    from .evaluate import LABEL_FLIP, OUT_OF_RADIUS

    flips = sum(1 for d in decisions if not d.accepted and LABEL_FLIP in d.reasons)
    outside = sum(1 for d in decisions if not d.accepted and OUT_OF_RADIUS in d.reasons)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        bars = ["accepted", "rej: flip", "rej: radius"]
        vals = [report.accepted, flips, outside]
        ax.bar(bars, vals, color=["#55a868", "#c44e52", "#dd8452"])
        for i, v in enumerate(vals):
            ax.text(i, v, str(v), ha="center", va="bottom", fontsize=8)
        ax.set_title(
            f"macro-F1 {report.macro_f1:.3f} at coverage {report.coverage:.3f} "
            f"({report.accepted}/{report.total})"
        )
        ax.set_ylabel("samples")
        return _save(fig, Path(outdir), "decisions")


def matrix_heatmap(matrix: CrossMatrix, outdir: str | Path) -> Path:
    """Macro-F1 heatmap, evals x trains, coverage in each cell."""
    f1 = np.array([
        [matrix.cells[(t, e)].selective.macro_f1 for t in matrix.trains]
        for e in matrix.evals
    ])
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(
            figsize=(1.2 + 1.1 * len(matrix.trains), 1.0 + 0.7 * len(matrix.evals))
        )
        ax.grid(False)
        im = ax.imshow(f1, cmap="viridis", vmin=0.0, vmax=1.0, aspect="auto")
        ax.set_xticks(range(len(matrix.trains)), matrix.trains, rotation=30, ha="right")
        ax.set_yticks(range(len(matrix.evals)), matrix.evals)
        for i, e in enumerate(matrix.evals):
            for j, t in enumerate(matrix.trains):
                cell = matrix.cells[(t, e)]
                ax.text(
                    j, i, f"{cell.selective.macro_f1:.2f}\ncov {cell.selective.coverage:.2f}",
                    ha="center", va="center", fontsize=7,
                    color="white" if f1[i, j] < 0.6 else "black",
                )
        ax.set_title("macro-F1 over accepted samples")
        fig.colorbar(im, ax=ax, shrink=0.85)
        return _save(fig, Path(outdir), "matrix_f1")


def overlap_vs_f1(matrix: CrossMatrix, outdir: str | Path) -> Path:
    """Scatter of per-cell train/eval overlap against accepted macro-F1."""
    xs, ys, names = [], [], []
    for (t, e), cell in matrix.cells.items():
        xs.append(cell.o_directional)
        ys.append(cell.selective.macro_f1)
        names.append(f"{t}/{e}")
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        ax.scatter(xs, ys, s=28, color="#4878a8", zorder=3)
        for x, y, name in zip(xs, ys, names):
            ax.annotate(name, (x, y), textcoords="offset points", xytext=(4, 3), fontsize=6)
        ax.set_xlabel("directional overlap (train vs eval)")
        ax.set_ylabel("macro-F1 over accepted")
        ax.set_xlim(-0.02, 1.02)
        ax.set_ylim(-0.02, 1.02)
        ax.set_title("overlap vs selective accuracy")
        return _save(fig, Path(outdir), "overlap_vs_f1")
