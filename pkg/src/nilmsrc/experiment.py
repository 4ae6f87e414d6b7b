"""End-to-end pipeline stages shared by the CLI subcommands.

Each stage runs eagerly and attaches its name to any package error it
raises, so failures surface as machine-readable, stage-labelled reports.
"""

from __future__ import annotations

import csv
from contextlib import contextmanager
from pathlib import Path

from . import classifier as clf
from . import dataset as ds
from . import metrics
from .config import ExperimentConfig
from .errors import DataError, NilmError


@contextmanager
def stage(name):
    """Attach a stage label to package errors raised inside the block."""
    try:
        yield
    except NilmError as err:
        if not getattr(err, "stage", None):
            err.stage = name
        raise


def load_household(cfg: ExperimentConfig) -> ds.Household:
    """Ingest the configured CSV, or simulate a household when none is set."""
    if cfg.uses_synth:
        with stage("synth"):
            return ds.synth_generate(cfg.synth)
    with stage("ingest"):
        path = Path(cfg.csv_path)
        if not path.exists():
            raise DataError(f"input file not found: {path}")
        return ds.ingest_csv(path, cfg.schema)


def prepare_windows(house: ds.Household, cfg: ExperimentConfig):
    """Resample every trace, windowize, and split chronologically."""
    with stage("resample"):
        resampled = ds.Household(
            aggregate=ds.resample_mean(house.aggregate, cfg.bin_seconds),
            appliances=tuple(ds.resample_mean(t, cfg.bin_seconds) for t in house.appliances),
            appliance_names=house.appliance_names,
        )
    with stage("windowize"):
        windowed = ds.windowize(
            resampled,
            window_seconds=cfg.window_seconds,
            bin_seconds=cfg.bin_seconds,
            on_threshold=cfg.on_threshold,
        )
    with stage("split"):
        return ds.chronological_split(windowed, cfg.train_fraction)


def fit_dictionary(train: ds.WindowedDataset, cfg: ExperimentConfig) -> clf.TrainingDictionary:
    with stage("fit"):
        label_sets = [
            frozenset(int(k) for k in range(train.num_appliances) if train.labels[i, k])
            for i in range(train.num_windows)
        ]
        return clf.fit(train.features, label_sets, num_classes=train.num_appliances)


def predict_windows(dictionary: clf.TrainingDictionary, test: ds.WindowedDataset, cfg: ExperimentConfig):
    with stage("predict"):
        return clf.predict_batch(dictionary, test.features, cfg.classifier)


def evaluate_predictions(pred, test: ds.WindowedDataset, cfg: ExperimentConfig) -> metrics.EvaluationReport:
    with stage("evaluate"):
        return metrics.evaluate(pred, test, test.mean_on_power, config=cfg.echo())


def write_predictions_csv(path, test: ds.WindowedDataset, pred) -> Path:
    """Delimited prediction output: one row per test window, 0/1 per appliance."""
    path = Path(path)
    matrix = metrics.as_label_matrix(pred, test.num_appliances)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["window_start", *test.appliance_names])
        for i in range(test.num_windows):
            writer.writerow([int(test.window_starts[i]), *(int(v) for v in matrix[i])])
    return path


def model_protocol(cfg: ExperimentConfig, train: ds.WindowedDataset) -> dict:
    """Protocol facts a model file carries so eval can sanity-check inputs."""
    return {
        "bin_seconds": cfg.bin_seconds,
        "window_seconds": cfg.window_seconds,
        "on_threshold": cfg.on_threshold,
        "train_fraction": cfg.train_fraction,
        "train_windows": int(train.num_windows),
        "mean_on_power": [metrics.format_number(v) for v in train.mean_on_power],
    }
