"""Report rendering: delimited grids, aligned text tables, and figures.

Every run writes its pooled confusion matrix as a PNG heatmap next to
the JSON report; suites additionally get a score-grid heatmap, a CSV of
the cells, and an aligned-text table.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .pipeline import RunReport, SuiteResult


def confusion_figure(matrix: np.ndarray, class_codes, title: str = ""):
    """Heatmap of counts, rows true / columns predicted."""
    cm = np.asarray(matrix)
    fig, ax = plt.subplots(figsize=(5.5, 4.8))
    im = ax.imshow(cm, cmap="Blues")
    labels = [str(c) for c in class_codes]
    ax.set_xticks(range(len(labels)), labels)
    ax.set_yticks(range(len(labels)), labels)
    ax.set_xlabel("predicted class code")
    ax.set_ylabel("true class code")
    if title:
        ax.set_title(title)
    threshold = cm.max() / 2 if cm.max() else 0.5
    for i in range(cm.shape[0]):
        for j in range(cm.shape[1]):
            ax.text(j, i, f"{cm[i, j]:d}", ha="center", va="center",
                    fontsize=8,
                    color="white" if cm[i, j] > threshold else "black")
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    return fig


def save_confusion_png(matrix: np.ndarray, class_codes, path,
                       title: str = "") -> None:
    fig = confusion_figure(matrix, class_codes, title)
    fig.savefig(path, dpi=130)
    plt.close(fig)


def suite_grid_figure(suite: SuiteResult):
    """Heatmap of mean F1 per (framework, classifier) cell."""
    grid = np.full((len(suite.frameworks), len(suite.classifiers)), np.nan)
    for i, fw in enumerate(suite.frameworks):
        for j, clf in enumerate(suite.classifiers):
            if (fw, clf) in suite.cells:
                grid[i, j] = suite.cells[(fw, clf)].summary.mean
    fig, ax = plt.subplots(figsize=(6.5, 4.8))
    im = ax.imshow(grid, cmap="viridis", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(len(suite.classifiers)), suite.classifiers)
    ax.set_yticks(range(len(suite.frameworks)), suite.frameworks)
    ax.set_title("cross-validated micro-F1 (mean)")
    for i in range(grid.shape[0]):
        for j in range(grid.shape[1]):
            text = "ERR" if np.isnan(grid[i, j]) else f"{grid[i, j]:.3f}"
            ax.text(j, i, text, ha="center", va="center", fontsize=9,
                    color="white" if np.isnan(grid[i, j]) or grid[i, j] < 0.6
                    else "black")
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    return fig


def save_suite_grid_png(suite: SuiteResult, path) -> None:
    fig = suite_grid_figure(suite)
    fig.savefig(path, dpi=130)
    plt.close(fig)


def grid_csv(suite: SuiteResult) -> str:
    """CSV with one row per framework: mean, two_sigma pairs per classifier."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["framework"]
    for clf in suite.classifiers:
        header += [f"{clf}_mean_f1", f"{clf}_two_sigma"]
    writer.writerow(header)
    for fw in suite.frameworks:
        row = [fw]
        for clf in suite.classifiers:
            if (fw, clf) in suite.cells:
                s = suite.cells[(fw, clf)].summary
                row += [f"{s.mean:.6f}", f"{s.two_sigma:.6f}"]
            else:
                row += ["error", "error"]
        writer.writerow(row)
    return buf.getvalue()


def grid_text(suite: SuiteResult) -> str:
    """Aligned table of "mean (+/- 2sigma)" cells."""
    width = 22
    lines = ["".ljust(10) + "".join(clf.rjust(width) for clf in suite.classifiers)]
    for fw in suite.frameworks:
        cells = [suite.cell_text(fw, clf).rjust(width) for clf in suite.classifiers]
        lines.append(fw.ljust(10) + "".join(cells))
    return "\n".join(lines) + "\n"


def save_run_outputs(run: RunReport, outdir) -> dict[str, Path]:
    """Write report.json, fold_scores.csv and confusion_matrix.png."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {}

    paths["report"] = outdir / "report.json"
    paths["report"].write_text(run.to_json(), encoding="utf-8")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["fold", "f1"])
    for i, score in enumerate(run.summary.fold_scores):
        writer.writerow([i, f"{score:.6f}"])
    paths["fold_scores"] = outdir / "fold_scores.csv"
    paths["fold_scores"].write_text(buf.getvalue(), encoding="utf-8")

    paths["confusion"] = outdir / "confusion_matrix.png"
    save_confusion_png(run.pooled_matrix, run.class_codes, paths["confusion"],
                       title=f"{run.spec.framework} + {run.spec.classifier}")
    return paths


def save_suite_outputs(suite: SuiteResult, outdir) -> dict[str, Path]:
    """Write grid.csv, grid.txt, the grid heatmap, and per-cell reports."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "grid_csv": outdir / "grid.csv",
        "grid_txt": outdir / "grid.txt",
        "grid_png": outdir / "f1_grid.png",
    }
    paths["grid_csv"].write_text(grid_csv(suite), encoding="utf-8")
    paths["grid_txt"].write_text(grid_text(suite), encoding="utf-8")
    save_suite_grid_png(suite, paths["grid_png"])
    for (fw, clf), run in suite.cells.items():
        cell_dir = outdir / f"{fw}_{clf}"
        save_run_outputs(run, cell_dir)
    for (fw, clf), message in suite.failures.items():
        (outdir / f"{fw}_{clf}.error.txt").write_text(message + "\n",
                                                      encoding="utf-8")
    return paths
