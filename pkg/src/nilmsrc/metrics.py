"""Multi-label evaluation: F1 scores, energy error, and report emission.

F1(TP, FP, FN) = 2*TP / (2*TP + FP + FN); the micro variant pools counts
over labels before applying the formula, the macro variant averages the
per-label scores.  The average energy error compares the energy implied
by predicted ON windows (window count x train-side mean ON power) against
the ground-truth energy, as a fraction of the latter.

Reports serialise to JSON with a fixed key order and decimal-string
numbers (6 significant digits) so identical runs emit identical bytes,
plus an aligned plain-text table for humans.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ZeroActualEnergy
from .dataset import WindowedDataset


@dataclass(frozen=True)
class ConfusionCounts:
    """Per-label TP/FP/FN/TN; each label's four counts sum to the number
    of evaluated windows."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray

    @property
    def num_labels(self):
        return self.tp.size

    def totals(self):
        return int(self.tp.sum()), int(self.fp.sum()), int(self.fn.sum())


@dataclass(frozen=True)
class EvaluationReport:
    """Everything a run needs to be read, compared, and reproduced."""

    f1_macro: float
    f1_micro: float
    aee: float
    per_appliance: tuple  # (name, f1, energy_error-or-None) per label
    counts: ConfusionCounts
    estimated_energy: np.ndarray
    actual_energy: np.ndarray
    windows_evaluated: int
    degenerate_labels: tuple
    micro_degenerate: bool
    config: dict


def as_label_matrix(pred, num_labels: int) -> np.ndarray:
    """Accept either a binary matrix or a list of label sets."""
    if isinstance(pred, np.ndarray) and pred.ndim == 2:
        return (pred != 0).astype(int)
    mat = np.zeros((len(pred), num_labels), dtype=int)
    for i, labels in enumerate(pred):
        for k in labels:
            mat[i, int(k)] = 1
    return mat


def confusion_counts(pred: np.ndarray, truth: np.ndarray) -> ConfusionCounts:
    """Per-label confusion counts from binary (windows x labels) matrices."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise DimensionMismatch(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    p = pred != 0
    t = truth != 0
    return ConfusionCounts(
        tp=np.sum(p & t, axis=0),
        fp=np.sum(p & ~t, axis=0),
        fn=np.sum(~p & t, axis=0),
        tn=np.sum(~p & ~t, axis=0),
    )


def f1(tp, fp, fn) -> float:
    """2*TP / (2*TP + FP + FN); 0.0 when all three counts are zero."""
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0
    return 2.0 * tp / denom


def f1_is_degenerate(tp, fp, fn) -> bool:
    """True when TP = FP = FN = 0, i.e. the score 0 means "no support",
    not "failed"."""
    return tp == 0 and fp == 0 and fn == 0


def f1_micro(counts: ConfusionCounts) -> float:
    """F1 of the label-pooled counts."""
    return f1(*counts.totals())


def f1_macro(counts: ConfusionCounts) -> float:
    """Unweighted mean of the per-label F1 over all labels."""
    n = counts.num_labels
    if n == 0:
        return 0.0
    return float(
        sum(f1(int(counts.tp[i]), int(counts.fp[i]), int(counts.fn[i])) for i in range(n)) / n
    )


def estimated_energy(pred: np.ndarray, window_hours: float, mean_on_power) -> np.ndarray:
    """Predicted-ON window count x window hours x train-side mean ON watts,
    per appliance, in watt-hours."""
    pred = np.asarray(pred)
    on_counts = (pred != 0).sum(axis=0)
    return on_counts * window_hours * np.asarray(mean_on_power, dtype=float)


def average_energy_error(pred, ds_test: WindowedDataset, mean_on_power_train) -> float:
    """|total estimated - total actual| / total actual over all appliances."""
    pred = as_label_matrix(pred, ds_test.num_appliances)
    if pred.shape != ds_test.labels.shape:
        raise DimensionMismatch(
            f"prediction shape {pred.shape} != test label shape {ds_test.labels.shape}"
        )
    actual_total = float(ds_test.actual_energy.sum())
    if actual_total <= 0.0:
        raise ZeroActualEnergy("ground-truth energy is zero; energy error undefined")
    est_total = float(estimated_energy(pred, ds_test.window_hours, mean_on_power_train).sum())
    return abs(est_total - actual_total) / actual_total


def per_appliance_report(pred, truth, names, estimated, actual):
    """(name, f1, energy_error) per appliance; error is None when the
    appliance's actual energy is zero."""
    counts = confusion_counts(pred, truth)
    rows = []
    for i, name in enumerate(names):
        score = f1(int(counts.tp[i]), int(counts.fp[i]), int(counts.fn[i]))
        act = float(actual[i])
        err = abs(float(estimated[i]) - act) / act if act > 0.0 else None
        rows.append((name, score, err))
    return rows


def evaluate(pred, ds_test: WindowedDataset, mean_on_power_train=None, config: dict | None = None) -> EvaluationReport:
    """Score predictions against a test split and assemble the full report.

    ``mean_on_power_train`` defaults to ``ds_test.mean_on_power``, which a
    chronological split already fills with the train-side statistic.
    """
    if mean_on_power_train is None:
        mean_on_power_train = ds_test.mean_on_power
    pred = as_label_matrix(pred, ds_test.num_appliances)
    if pred.shape != ds_test.labels.shape:
        raise DimensionMismatch(
            f"prediction shape {pred.shape} != test label shape {ds_test.labels.shape}"
        )
    counts = confusion_counts(pred, ds_test.labels)
    est = estimated_energy(pred, ds_test.window_hours, mean_on_power_train)
    rows = per_appliance_report(pred, ds_test.labels, ds_test.appliance_names, est, ds_test.actual_energy)
    degenerate = tuple(
        i
        for i in range(counts.num_labels)
        if f1_is_degenerate(int(counts.tp[i]), int(counts.fp[i]), int(counts.fn[i]))
    )
    return EvaluationReport(
        f1_macro=f1_macro(counts),
        f1_micro=f1_micro(counts),
        aee=average_energy_error(pred, ds_test, mean_on_power_train),
        per_appliance=tuple(rows),
        counts=counts,
        estimated_energy=est,
        actual_energy=ds_test.actual_energy.copy(),
        windows_evaluated=int(pred.shape[0]),
        degenerate_labels=degenerate,
        micro_degenerate=f1_is_degenerate(*counts.totals()),
        config=dict(config or {}),
    )


def format_number(v) -> str:
    """Positional decimal string with 6 significant digits (no exponent)."""
    v = float(v)
    if v != v:
        return "nan"
    return np.format_float_positional(v, precision=6, unique=False, fractional=False, trim="-")


def report_to_json(report: EvaluationReport) -> str:
    """Fixed-key-order JSON with all numbers as decimal strings."""
    doc = {
        "report": "nilmsrc-evaluation",
        "version": 1,
        "f1_macro": format_number(report.f1_macro),
        "f1_micro": format_number(report.f1_micro),
        "average_energy_error": format_number(report.aee),
        "windows_evaluated": report.windows_evaluated,
        "per_appliance": [
            {
                "name": name,
                "f1": format_number(score),
                "energy_error": None if err is None else format_number(err),
                "estimated_energy_wh": format_number(report.estimated_energy[i]),
                "actual_energy_wh": format_number(report.actual_energy[i]),
                "degenerate": i in report.degenerate_labels,
            }
            for i, (name, score, err) in enumerate(report.per_appliance)
        ],
        "counts": {
            "tp": [int(v) for v in report.counts.tp],
            "fp": [int(v) for v in report.counts.fp],
            "fn": [int(v) for v in report.counts.fn],
            "tn": [int(v) for v in report.counts.tn],
        },
        "degenerate": {
            "micro": report.micro_degenerate,
            "labels": list(report.degenerate_labels),
        },
        "config": report.config,
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def report_to_text(report: EvaluationReport) -> str:
    """Aligned summary table followed by per-appliance rows and the
    resolved configuration."""
    lines = []
    lines.append(f"{'Metric':<24}{'Value':>12}")
    lines.append(f"{'Macro F1-measure':<24}{format_number(report.f1_macro):>12}")
    lines.append(f"{'Micro F1-measure':<24}{format_number(report.f1_micro):>12}")
    lines.append(f"{'Average energy error':<24}{format_number(report.aee):>12}")
    lines.append("")
    width = max([len("Device")] + [len(name) for name, _, _ in report.per_appliance]) + 2
    lines.append(f"{'Device':<{width}}{'Error':>10}{'F1-score':>12}")
    for name, score, err in report.per_appliance:
        err_text = "n/a" if err is None else format_number(err)
        lines.append(f"{name:<{width}}{err_text:>10}{format_number(score):>12}")
    lines.append("")
    lines.append(f"windows evaluated: {report.windows_evaluated}")
    if report.config:
        lines.append("config:")
        for key in sorted(report.config):
            lines.append(f"  {key} = {report.config[key]}")
    return "\n".join(lines) + "\n"
