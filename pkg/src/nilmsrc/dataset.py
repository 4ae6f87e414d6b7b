"""Meter-data ingestion, windowing, and synthetic household generation.

The processing chain mirrors a short-logging deployment: raw per-second
or per-minute active-power traces are averaged into 10-minute bins, the
six bins of each hour form one feature window, an appliance is labelled
ON in a window when its mean power over that hour exceeds a watt
threshold, and the earliest fraction of windows becomes the training
split.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import Decimal
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    DimensionMismatch,
    GridMismatch,
    MissingColumn,
    NegativePower,
    NonMonotonicTimestamp,
    TooFewWindows,
    UsageError,
)

DEFAULT_BIN_SECONDS = 600
DEFAULT_WINDOW_SECONDS = 3600
DEFAULT_ON_THRESHOLD = 15.0


@dataclass(frozen=True)
class PowerTrace:
    """Active power samples in watts at strictly increasing epoch seconds."""

    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vals = np.asarray(self.values, dtype=float)
        if ts.shape != vals.shape or ts.ndim != 1:
            raise DimensionMismatch("timestamps and values must be 1-d and equal length")
        if ts.size and np.any(np.diff(ts) <= 0):
            row = int(np.nonzero(np.diff(ts) <= 0)[0][0]) + 1
            raise NonMonotonicTimestamp(row)
        if vals.size and (not np.all(np.isfinite(vals)) or np.any(vals < 0)):
            row = int(np.nonzero(~np.isfinite(vals) | (vals < 0))[0][0])
            raise NegativePower(row, f"non-finite or negative power at sample {row}")
        ts.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.timestamps.size


@dataclass(frozen=True)
class Household:
    """Aggregate meter trace plus named per-appliance ground-truth traces."""

    aggregate: PowerTrace
    appliances: tuple
    appliance_names: tuple

    def __post_init__(self):
        if len(self.appliances) < 1:
            raise DataError("a household needs at least one appliance trace")
        if len(self.appliances) != len(self.appliance_names):
            raise DimensionMismatch("appliance traces and names differ in count")
        if len(set(self.appliance_names)) != len(self.appliance_names):
            raise DataError("appliance names must be unique")
        object.__setattr__(self, "appliances", tuple(self.appliances))
        object.__setattr__(self, "appliance_names", tuple(str(n) for n in self.appliance_names))

    @property
    def num_appliances(self):
        return len(self.appliances)


@dataclass(frozen=True)
class WindowedDataset:
    """Hourly feature windows with binary appliance labels.

    ``features`` holds one row per kept window (the aggregate bin means of
    that hour); ``appliance_power`` the matching per-appliance hourly mean
    watts from ground truth, from which ``labels``, ``mean_on_power`` and
    ``actual_energy`` (watt-hours over the kept windows) derive.  After a
    chronological split, ``mean_on_power`` on both sides carries the
    train-side statistic -- the only label-side quantity later stages may
    use.
    """

    features: np.ndarray
    labels: np.ndarray
    window_starts: np.ndarray
    appliance_power: np.ndarray
    mean_on_power: np.ndarray
    actual_energy: np.ndarray
    appliance_names: tuple
    on_threshold: float
    bin_seconds: int
    window_seconds: int
    dropped_windows: int = 0

    @property
    def num_windows(self):
        return self.features.shape[0]

    @property
    def num_appliances(self):
        return len(self.appliance_names)

    @property
    def window_hours(self):
        return self.window_seconds / 3600.0


@dataclass
class SynthConfig:
    """Two-state Markov appliance simulator settings.

    ``on_to_on`` / ``off_to_off`` are per-10-minute-step stay
    probabilities, given per appliance or as one scalar for all.
    """

    num_appliances: int = 5
    rated_powers: tuple = (100.0, 200.0, 400.0, 800.0, 1600.0)
    on_to_on: tuple = 0.7
    off_to_off: tuple = 0.7
    noise_std: float = 1.0
    duration_hours: int = 600
    seed: int = 0
    appliance_names: tuple | None = None

    def __post_init__(self):
        n = int(self.num_appliances)
        if n < 1:
            raise UsageError("num_appliances must be >= 1")
        self.num_appliances = n
        self.rated_powers = _per_appliance(self.rated_powers, n, "rated_powers")
        self.on_to_on = _per_appliance(self.on_to_on, n, "on_to_on")
        self.off_to_off = _per_appliance(self.off_to_off, n, "off_to_off")
        if any(p <= 0 for p in self.rated_powers):
            raise UsageError("rated_powers must be positive")
        for name, probs in (("on_to_on", self.on_to_on), ("off_to_off", self.off_to_off)):
            if any(not 0.0 <= p <= 1.0 for p in probs):
                raise UsageError(f"{name} probabilities must lie in [0, 1]")
        if self.noise_std < 0:
            raise UsageError("noise_std must be nonnegative")
        if self.duration_hours < 1:
            raise UsageError("duration_hours must be >= 1")
        if self.appliance_names is None:
            self.appliance_names = tuple(f"app{i + 1}" for i in range(n))
        else:
            self.appliance_names = tuple(str(v) for v in self.appliance_names)
            if len(self.appliance_names) != n:
                raise UsageError("appliance_names length must equal num_appliances")


def _per_appliance(value, n, name):
    try:
        seq = tuple(float(v) for v in value)
    except TypeError:
        seq = (float(value),)
    if len(seq) == 1:
        seq = seq * n
    if len(seq) != n:
        raise UsageError(f"{name} needs 1 or {n} values, got {len(seq)}")
    return seq


@dataclass
class CsvSchema:
    """Column-name mapping for household CSV exports.

    ``appliances`` maps output appliance name -> CSV column; None means
    "every remaining column, named by its header".
    """

    timestamp: str = "timestamp"
    aggregate: str = "aggregate"
    appliances: dict | None = None


def _parse_epoch(token, row):
    try:
        return int(token)
    except ValueError as err:
        raise DataError(f"data row {row}: bad epoch timestamp {token!r}") from err


def _parse_iso(token, row):
    try:
        stamp = datetime.fromisoformat(token.replace("Z", "+00:00"))
    except ValueError as err:
        raise DataError(f"data row {row}: bad ISO-8601 timestamp {token!r}") from err
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return int(stamp.timestamp())


def ingest_csv(path, schema: CsvSchema | None = None) -> Household:
    """Load one household CSV into sorted, validated traces.

    Timestamps are integer epoch seconds or ISO-8601, auto-detected from
    the first data row and applied uniformly.  Out-of-order or duplicate
    timestamps and negative powers are rejected, never repaired.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        col_index = {name: i for i, name in enumerate(header)}

        for required in (schema.timestamp, schema.aggregate):
            if required not in col_index:
                raise MissingColumn(required)
        if schema.appliances is None:
            app_pairs = [(h, h) for h in header if h not in (schema.timestamp, schema.aggregate)]
        else:
            app_pairs = list(schema.appliances.items())
            for _, col in app_pairs:
                if col not in col_index:
                    raise MissingColumn(col)
        if not app_pairs:
            raise MissingColumn("<appliance>", "need at least one appliance column")

        value_cols = [col_index[schema.aggregate]] + [col_index[c] for _, c in app_pairs]
        ts_col = col_index[schema.timestamp]

        timestamps = []
        columns = [[] for _ in value_cols]
        parse_ts = None
        prev_ts = None
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise DataError(f"data row {row_no}: expected {len(header)} fields, got {len(row)}")
            token = row[ts_col].strip()
            if parse_ts is None:
                parse_ts = _parse_epoch if token.lstrip("+-").isdigit() else _parse_iso
            ts = parse_ts(token, row_no)
            if prev_ts is not None and ts <= prev_ts:
                raise NonMonotonicTimestamp(row_no)
            prev_ts = ts
            timestamps.append(ts)
            for j, ci in enumerate(value_cols):
                try:
                    val = float(row[ci])
                except ValueError as err:
                    raise DataError(f"data row {row_no}: bad power value {row[ci]!r}") from err
                if not math.isfinite(val) or val < 0.0:
                    raise NegativePower(row_no)
                columns[j].append(val)

    if not timestamps:
        raise DataError(f"{path}: no data rows")
    ts_arr = np.asarray(timestamps, dtype=np.int64)
    traces = [PowerTrace(ts_arr, np.asarray(col)) for col in columns]
    return Household(
        aggregate=traces[0],
        appliances=tuple(traces[1:]),
        appliance_names=tuple(name for name, _ in app_pairs),
    )


def resample_mean(trace: PowerTrace, bin_seconds: int = DEFAULT_BIN_SECONDS) -> PowerTrace:
    """Average raw samples into fixed bins of ``bin_seconds``.

    Bins are anchored at the first timestamp rounded down to a whole bin;
    a bin's value is the arithmetic mean of the samples in
    [start, start + bin_seconds).  Bins with no samples simply do not
    appear in the output, which is how missing data propagates to
    windowize.
    """
    if len(trace) == 0:
        raise DataError("cannot resample an empty trace")
    if bin_seconds < 1:
        raise UsageError("bin_seconds must be >= 1")
    anchor = (int(trace.timestamps[0]) // bin_seconds) * bin_seconds
    idx = (trace.timestamps - anchor) // bin_seconds
    counts = np.bincount(idx)
    sums = np.bincount(idx, weights=trace.values)
    occupied = np.nonzero(counts > 0)[0]
    means = sums[occupied] / counts[occupied]
    stamps = anchor + occupied.astype(np.int64) * bin_seconds
    return PowerTrace(stamps, means)


def windowize(
    house: Household,
    window_seconds: int = DEFAULT_WINDOW_SECONDS,
    bin_seconds: int = DEFAULT_BIN_SECONDS,
    on_threshold: float = DEFAULT_ON_THRESHOLD,
) -> WindowedDataset:
    """Group resampled bins into windows and label appliance states.

    All traces must sit on the same ``bin_seconds`` grid.  A window is
    kept only if every one of its bins is present in the aggregate and in
    every appliance trace; dropped windows are counted, not imputed.
    Appliance i is ON in a window when its mean power there exceeds
    ``on_threshold`` watts.
    """
    if window_seconds % bin_seconds != 0:
        raise UsageError("window_seconds must be a multiple of bin_seconds")
    bins_per_window = window_seconds // bin_seconds

    traces = [house.aggregate, *house.appliances]
    for t in traces:
        if np.any(t.timestamps % bin_seconds != 0):
            raise GridMismatch(
                f"trace timestamps are not aligned to the {bin_seconds}-second grid"
            )
    lookup = [dict(zip(t.timestamps.tolist(), t.values.tolist())) for t in traces]

    candidates = sorted({int(t) // window_seconds for t in house.aggregate.timestamps})
    kept_rows = []
    kept_starts = []
    kept_power = []
    dropped = 0
    for w in candidates:
        start = w * window_seconds
        stamps = [start + j * bin_seconds for j in range(bins_per_window)]
        if any(s not in table for table in lookup for s in stamps):
            dropped += 1
            continue
        kept_rows.append([lookup[0][s] for s in stamps])
        kept_power.append([float(np.mean([table[s] for s in stamps])) for table in lookup[1:]])
        kept_starts.append(start)

    n_app = house.num_appliances
    features = np.asarray(kept_rows, dtype=float).reshape(len(kept_rows), bins_per_window)
    appliance_power = np.asarray(kept_power, dtype=float).reshape(len(kept_rows), n_app)
    window_starts = np.asarray(kept_starts, dtype=np.int64)
    labels = (appliance_power > on_threshold).astype(int)
    window_hours = window_seconds / 3600.0
    mean_on = _mean_on_power(appliance_power, labels)
    actual_energy = appliance_power.sum(axis=0) * window_hours

    return WindowedDataset(
        features=features,
        labels=labels,
        window_starts=window_starts,
        appliance_power=appliance_power,
        mean_on_power=mean_on,
        actual_energy=actual_energy,
        appliance_names=house.appliance_names,
        on_threshold=float(on_threshold),
        bin_seconds=int(bin_seconds),
        window_seconds=int(window_seconds),
        dropped_windows=dropped,
    )


def _mean_on_power(appliance_power, labels):
    n_app = appliance_power.shape[1] if appliance_power.ndim == 2 else 0
    out = np.zeros(n_app)
    for i in range(n_app):
        on = labels[:, i] == 1
        if np.any(on):
            out[i] = float(appliance_power[on, i].mean())
    return out


def _take_windows(ds: WindowedDataset, sl: slice, mean_on_power) -> WindowedDataset:
    power = ds.appliance_power[sl]
    return WindowedDataset(
        features=ds.features[sl],
        labels=ds.labels[sl],
        window_starts=ds.window_starts[sl],
        appliance_power=power,
        mean_on_power=mean_on_power,
        actual_energy=power.sum(axis=0) * ds.window_hours,
        appliance_names=ds.appliance_names,
        on_threshold=ds.on_threshold,
        bin_seconds=ds.bin_seconds,
        window_seconds=ds.window_seconds,
        dropped_windows=ds.dropped_windows,
    )


def chronological_split(ds: WindowedDataset, train_fraction: float = 0.10):
    """Earliest ceil(train_fraction * W) windows train, the rest test.

    Both returned datasets carry mean_on_power computed from the training
    windows alone, so no test-side plug data can leak into the energy
    estimate.
    """
    if not 0.0 < train_fraction < 1.0:
        raise UsageError("train_fraction must lie strictly between 0 and 1")
    total = ds.num_windows
    if total < 2:
        raise TooFewWindows(f"need at least 2 windows to split, have {total}")
    # Decimal keeps ceil(0.10 * 100) at 10 despite float(0.10) > 1/10.
    n_train = int(math.ceil(Decimal(str(train_fraction)) * total))
    if n_train >= total:
        raise TooFewWindows(
            f"train_fraction {train_fraction} leaves no test windows (W={total})"
        )
    train_power = ds.appliance_power[:n_train]
    train_labels = ds.labels[:n_train]
    mean_on_train = _mean_on_power(train_power, train_labels)
    train = _take_windows(ds, slice(0, n_train), mean_on_train)
    test = _take_windows(ds, slice(n_train, total), mean_on_train)
    return train, test


def synth_generate(cfg: SynthConfig) -> Household:
    """Simulate a household of independent two-state Markov appliances.

    Each appliance draws its initial state from the chain's stationary
    distribution, then per 10-minute step stays ON with ``on_to_on`` or
    OFF with ``off_to_off``.  An ON step emits the rated power plus
    zero-mean Gaussian noise truncated at 0; the aggregate is the sum of
    the appliance traces plus independent noise.  Output is fully
    determined by the seed.
    """
    steps = cfg.duration_hours * 3600 // DEFAULT_BIN_SECONDS
    timestamps = np.arange(steps, dtype=np.int64) * DEFAULT_BIN_SECONDS
    rng = np.random.default_rng(cfg.seed)

    traces = []
    total = np.zeros(steps)
    for i in range(cfg.num_appliances):
        p_on = cfg.on_to_on[i]
        p_off = cfg.off_to_off[i]
        leave_on = 1.0 - p_on
        leave_off = 1.0 - p_off
        stationary_on = leave_off / (leave_on + leave_off) if leave_on + leave_off > 0 else 0.5

        draws = rng.random(steps)
        state = np.empty(steps, dtype=bool)
        state[0] = draws[0] < stationary_on
        for t in range(1, steps):
            stay = p_on if state[t - 1] else p_off
            state[t] = (draws[t] < stay) == state[t - 1]
        values = np.where(state, cfg.rated_powers[i], 0.0)
        if cfg.noise_std > 0:
            noise = rng.normal(0.0, cfg.noise_std, steps)
            values = np.where(state, np.maximum(values + noise, 0.0), 0.0)
        traces.append(PowerTrace(timestamps, values))
        total = total + values

    if cfg.noise_std > 0:
        total = np.maximum(total + rng.normal(0.0, cfg.noise_std, steps), 0.0)
    aggregate = PowerTrace(timestamps, total)
    return Household(aggregate=aggregate, appliances=tuple(traces), appliance_names=cfg.appliance_names)


def household_to_csv(house: Household, path):
    """Write a household in the ingestion CSV shape (epoch timestamps)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "aggregate", *house.appliance_names])
        for idx in range(len(house.aggregate)):
            writer.writerow(
                [int(house.aggregate.timestamps[idx]), repr(float(house.aggregate.values[idx]))]
                + [repr(float(t.values[idx])) for t in house.appliances]
            )


def save_windowed(ds: WindowedDataset, out_dir, prefix=""):
    """Export a WindowedDataset as a features/labels CSV pair + JSON sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    feat_path = out_dir / f"{prefix}features.csv"
    label_path = out_dir / f"{prefix}labels.csv"
    meta_path = out_dir / f"{prefix}windows.json"

    bins = ds.features.shape[1] if ds.num_windows else ds.window_seconds // ds.bin_seconds
    with feat_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["window_start", *(f"bin{j}" for j in range(bins))])
        for i in range(ds.num_windows):
            writer.writerow([int(ds.window_starts[i]), *(repr(float(v)) for v in ds.features[i])])
    with label_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["window_start", *ds.appliance_names])
        for i in range(ds.num_windows):
            writer.writerow([int(ds.window_starts[i]), *(int(v) for v in ds.labels[i])])
    meta = {
        "appliance_names": list(ds.appliance_names),
        "on_threshold": ds.on_threshold,
        "bin_seconds": ds.bin_seconds,
        "window_seconds": ds.window_seconds,
        "mean_on_power": [repr(float(v)) for v in ds.mean_on_power],
        "actual_energy_wh": [repr(float(v)) for v in ds.actual_energy],
        "num_windows": int(ds.num_windows),
        "dropped_windows": int(ds.dropped_windows),
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return feat_path, label_path, meta_path
