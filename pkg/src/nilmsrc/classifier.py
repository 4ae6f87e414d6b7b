"""Multi-label classification by class-restricted sparse reconstruction.

A training dictionary holds meter windows as unit-norm columns, each
tagged with the set of appliances that were ON.  A test window is coded
once over the full dictionary; for every appliance class the code is
restricted to that class's columns and the Euclidean distance between the
window and the class reconstruction is measured.  The window is assigned
to every class whose distance is within ``tau`` times the smallest one.

A window that belongs to several classes contributes its single column to
each of those classes; columns are never duplicated, so the global code
stays well-posed.  Columns with no ON appliance stay in the dictionary
(they help the representation) but belong to no class.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyTrainingSet,
    NilmError,
    NoTrainedClasses,
    UsageError,
)
from .solver import DesignMatrix, SolverConfig, SparseCode, normalize_columns, solve

MODEL_FORMAT = "nilmsrc-dictionary"
MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainingDictionary:
    """Normalised training windows as columns, partitioned by class.

    ``class_columns[k]`` lists, in ascending order, the column indices
    whose label set contains appliance ``k``; it is always rebuildable
    from ``column_labels``.
    """

    design: DesignMatrix
    column_labels: tuple
    class_columns: tuple
    num_classes: int

    @property
    def window_length(self):
        return self.design.entries.shape[0]

    @property
    def num_columns(self):
        return self.design.entries.shape[1]

    @property
    def empty_classes(self):
        """Classes with no training column (permitted, but worth reporting)."""
        return tuple(k for k in range(self.num_classes) if not self.class_columns[k])


@dataclass(frozen=True)
class DistanceProfile:
    """Per-class reconstruction distances for one test window.

    ``min_distance`` is taken over classes that have at least one training
    column; it is NaN when no class has any.
    """

    distances: np.ndarray
    min_distance: float
    sparse_code: SparseCode


@dataclass
class ClassifierConfig:
    """tau-rule settings plus the sparse solver to code windows with.

    ``vacancy_norm_threshold`` (watts): windows whose Euclidean norm is at
    or below it predict the empty set; the default 0 keeps the always-at-
    least-one-class behaviour.
    """

    tau: float = 2.0
    vacancy_norm_threshold: float = 0.0
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.tau < 1.0:
            raise UsageError("tau must be >= 1 (the argmin class must stay predictable)")
        if self.vacancy_norm_threshold < 0.0:
            raise UsageError("vacancy_norm_threshold must be nonnegative")


def _as_label_set(labels, num_classes):
    out = frozenset(int(v) for v in labels)
    for v in out:
        if v < 0 or (num_classes is not None and v >= num_classes):
            raise UsageError(f"label {v} outside [0, {num_classes})")
    return out


def fit(windows, labels, num_classes: int | None = None) -> TrainingDictionary:
    """Build a TrainingDictionary from windows (rows) and their label sets.

    ``labels[i]`` is the set of appliance ids ON in window ``i``.  When
    ``num_classes`` is omitted it becomes max id + 1.
    """
    mat = np.asarray(windows, dtype=float)
    if mat.ndim != 2 or mat.shape[0] < 1:
        raise EmptyTrainingSet("need at least one training window")
    if len(labels) != mat.shape[0]:
        raise DimensionMismatch(f"{mat.shape[0]} windows but {len(labels)} label sets")

    if num_classes is None:
        num_classes = 1 + max((max(s) for s in labels if len(s)), default=-1)
    label_sets = tuple(_as_label_set(s, num_classes) for s in labels)

    design = normalize_columns(mat.T)
    class_columns = tuple(
        tuple(j for j, s in enumerate(label_sets) if k in s) for k in range(num_classes)
    )
    return TrainingDictionary(
        design=design,
        column_labels=label_sets,
        class_columns=class_columns,
        num_classes=num_classes,
    )


def class_distance_profile(dictionary: TrainingDictionary, y, cfg: ClassifierConfig | None = None) -> DistanceProfile:
    """Code ``y`` once over the full dictionary, then measure per class.

    For class k the reconstruction uses only the coefficients of its own
    columns; a class with no columns reconstructs nothing, so its distance
    is exactly ||y||_2.
    """
    cfg = cfg or ClassifierConfig()
    entries = dictionary.design.entries
    y = np.asarray(y, dtype=float).ravel()
    if y.size != entries.shape[0]:
        raise DimensionMismatch(
            f"window length {y.size} != dictionary window length {entries.shape[0]}"
        )

    code = solve(dictionary.design, y, cfg.solver)
    alpha = code.coefficients
    y_norm = float(np.linalg.norm(y))

    distances = np.empty(dictionary.num_classes)
    for k, cols in enumerate(dictionary.class_columns):
        if cols:
            recon = entries[:, cols] @ alpha[list(cols)]
            distances[k] = float(np.linalg.norm(y - recon))
        else:
            distances[k] = y_norm
    distances.setflags(write=False)

    populated = [distances[k] for k in range(dictionary.num_classes) if dictionary.class_columns[k]]
    min_distance = float(min(populated)) if populated else float("nan")
    return DistanceProfile(distances=distances, min_distance=min_distance, sparse_code=code)


def predict_one(dictionary: TrainingDictionary, y, cfg: ClassifierConfig | None = None) -> frozenset:
    """Label set for one window: every populated class within tau * min distance.

    The comparison is non-strict, so the argmin class is always included;
    a window at or below the vacancy norm threshold predicts the empty set.
    """
    cfg = cfg or ClassifierConfig()
    y = np.asarray(y, dtype=float).ravel()
    if y.size != dictionary.window_length:
        raise DimensionMismatch(
            f"window length {y.size} != dictionary window length {dictionary.window_length}"
        )
    if float(np.linalg.norm(y)) <= cfg.vacancy_norm_threshold:
        return frozenset()
    if all(not cols for cols in dictionary.class_columns):
        raise NoTrainedClasses("every class has zero training columns")

    profile = class_distance_profile(dictionary, y, cfg)
    cutoff = cfg.tau * profile.min_distance
    return frozenset(
        k
        for k in range(dictionary.num_classes)
        if dictionary.class_columns[k] and profile.distances[k] <= cutoff
    )


def predict_batch(dictionary: TrainingDictionary, Y, cfg: ClassifierConfig | None = None) -> list:
    """predict_one over the rows of ``Y``, preserving input order."""
    cfg = cfg or ClassifierConfig()
    rows = np.asarray(Y, dtype=float)
    if rows.size == 0:
        return []
    if rows.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d batch of windows, got shape {rows.shape}")
    out = []
    for i in range(rows.shape[0]):
        try:
            out.append(predict_one(dictionary, rows[i], cfg))
        except NilmError as err:
            err.args = (f"window {i}: {err}",)
            raise
    return out


def labels_to_matrix(label_sets, num_classes: int) -> np.ndarray:
    """Binary (windows x classes) matrix from a list of label sets."""
    mat = np.zeros((len(label_sets), num_classes), dtype=int)
    for i, s in enumerate(label_sets):
        for k in s:
            mat[i, int(k)] = 1
    return mat


def _float_to_str(v) -> str:
    return repr(float(v))


def dictionary_to_payload(dictionary: TrainingDictionary) -> dict:
    """JSON-ready form of a TrainingDictionary.

    Floats are encoded as decimal strings via repr so the entries survive
    a save/load cycle bit-exactly.
    """
    entries = dictionary.design.entries
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "window_length": int(entries.shape[0]),
        "num_columns": int(entries.shape[1]),
        "num_classes": int(dictionary.num_classes),
        "columns": [[_float_to_str(v) for v in entries[:, j]] for j in range(entries.shape[1])],
        "column_norms": [_float_to_str(v) for v in dictionary.design.column_norms],
        "column_labels": [sorted(int(v) for v in s) for s in dictionary.column_labels],
    }


def dictionary_from_payload(payload: dict) -> TrainingDictionary:
    """Inverse of dictionary_to_payload; columns are not re-normalised."""
    if payload.get("format") != MODEL_FORMAT:
        raise UsageError(f"not a {MODEL_FORMAT} payload")
    if int(payload.get("version", -1)) != MODEL_VERSION:
        raise UsageError(f"unsupported model version {payload.get('version')!r}")
    m = int(payload["window_length"])
    cols = payload["columns"]
    entries = np.empty((m, len(cols)))
    for j, col in enumerate(cols):
        entries[:, j] = [float(v) for v in col]
    norms = np.asarray([float(v) for v in payload["column_norms"]])
    entries.setflags(write=False)
    norms.setflags(write=False)
    num_classes = int(payload["num_classes"])
    label_sets = tuple(frozenset(int(v) for v in s) for s in payload["column_labels"])
    class_columns = tuple(
        tuple(j for j, s in enumerate(label_sets) if k in s) for k in range(num_classes)
    )
    return TrainingDictionary(
        design=DesignMatrix(entries=entries, column_norms=norms),
        column_labels=label_sets,
        class_columns=class_columns,
        num_classes=num_classes,
    )


def save_model(path, dictionary: TrainingDictionary, appliance_names=None, config_echo=None, protocol=None):
    """Write the dictionary plus run metadata as a versioned JSON model file."""
    doc = {
        "dictionary": dictionary_to_payload(dictionary),
        "appliance_names": list(appliance_names) if appliance_names is not None else None,
        "config": config_echo,
        "protocol": protocol,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_model(path):
    """Read a model file back; returns (TrainingDictionary, metadata dict)."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if "dictionary" not in doc:
        raise UsageError(f"{path}: not a nilmsrc model file")
    dictionary = dictionary_from_payload(doc["dictionary"])
    meta = {
        "appliance_names": doc.get("appliance_names"),
        "config": doc.get("config"),
        "protocol": doc.get("protocol"),
    }
    return dictionary, meta
