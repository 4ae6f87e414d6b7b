"""Figure rendering for evaluation reports.

Writes PNG files next to the JSON/text reports: per-appliance F1 bars,
estimated-vs-actual energy bars, and an ON/OFF timeline comparing
predictions with ground truth.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import EvaluationReport

_BAR_COLOR = "#33658a"
_TRUTH_COLOR = "#758e4f"
_PRED_COLOR = "#f26419"


def f1_bars(report: EvaluationReport, path) -> Path:
    """Per-appliance F1 with the macro/micro aggregates as reference lines."""
    names = [name for name, _, _ in report.per_appliance]
    scores = [score for _, score, _ in report.per_appliance]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(names)), 3.2))
    ax.bar(range(len(names)), scores, color=_BAR_COLOR)
    ax.axhline(report.f1_macro, color=_TRUTH_COLOR, linestyle="--", linewidth=1, label=f"macro {report.f1_macro:.3f}")
    ax.axhline(report.f1_micro, color=_PRED_COLOR, linestyle=":", linewidth=1, label=f"micro {report.f1_micro:.3f}")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("F1 score")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def energy_bars(report: EvaluationReport, path) -> Path:
    """Estimated vs ground-truth energy per appliance, in kWh."""
    names = [name for name, _, _ in report.per_appliance]
    est = np.asarray(report.estimated_energy, dtype=float) / 1000.0
    act = np.asarray(report.actual_energy, dtype=float) / 1000.0
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(names)), 3.2))
    ax.bar(x - 0.2, act, width=0.4, color=_TRUTH_COLOR, label="actual")
    ax.bar(x + 0.2, est, width=0.4, color=_PRED_COLOR, label="estimated")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("energy [kWh]")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def label_timeline(pred, truth, names, path) -> Path:
    """Two-row raster per appliance: ground truth above, prediction below."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    n_app = len(names)
    rows = []
    ticks = []
    for i in range(n_app):
        rows.append(truth[:, i])
        rows.append(pred[:, i])
        ticks.append(f"{names[i]} true")
        ticks.append(f"{names[i]} pred")
    raster = np.vstack(rows) if rows else np.zeros((0, 0))
    fig, ax = plt.subplots(figsize=(8.0, max(2.0, 0.4 * len(rows))))
    ax.imshow(raster, aspect="auto", interpolation="nearest", cmap="Greys", vmin=0, vmax=1)
    ax.set_yticks(range(len(ticks)))
    ax.set_yticklabels(ticks, fontsize=7)
    ax.set_xlabel("test window index")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_report_figures(report: EvaluationReport, out_dir, pred=None, truth=None, names=None):
    """Render every figure the report supports; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        f1_bars(report, out_dir / "f1_per_appliance.png"),
        energy_bars(report, out_dir / "energy_per_appliance.png"),
    ]
    if pred is not None and truth is not None and names is not None:
        paths.append(label_timeline(pred, truth, names, out_dir / "label_timeline.png"))
    return paths
