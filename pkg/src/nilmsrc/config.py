"""Experiment configuration: flat key=value files plus CLI overrides.

Precedence is flag > file > built-in default.  Every key has a string
form; the resolved configuration is echoed verbatim into reports so a
result can be reproduced from its own report.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .classifier import ClassifierConfig
from .dataset import CsvSchema, SynthConfig
from .errors import UsageError
from .solver import METHODS, SolverConfig

DEFAULTS = {
    "data.csv": "",
    "schema.timestamp": "timestamp",
    "schema.aggregate": "aggregate",
    "schema.appliances": "",
    "synth.num_appliances": "5",
    "synth.rated_powers": "100,200,400,800,1600",
    "synth.on_to_on": "0.7",
    "synth.off_to_off": "0.7",
    "synth.noise_std": "1.0",
    "synth.duration_hours": "600",
    "synth.appliance_names": "",
    "bin_seconds": "600",
    "window_seconds": "3600",
    "on_threshold": "15.0",
    "train_fraction": "0.10",
    "seed": "0",
    "tau": "2.0",
    "vacancy_norm_threshold": "0.0",
    "solver.method": "omp",
    "solver.max_sparsity": "10",
    "solver.lambda": "auto",
    "solver.max_iterations": "500",
    "solver.tolerance": "auto",
    "out": "out",
    "keep": "false",
}


def parse_config_file(path) -> dict:
    """Read `key = value` lines; '#' lines are comments, unknown keys fail."""
    out = {}
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{line_no}: unknown config key {key!r}")
        out[key] = value.strip()
    return out


def _parse_bool(raw, key):
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"{key}: expected a boolean, got {raw!r}")


def _parse_float(raw, key):
    try:
        return float(raw)
    except ValueError as err:
        raise UsageError(f"{key}: expected a number, got {raw!r}") from err


def _parse_int(raw, key):
    try:
        return int(raw)
    except ValueError as err:
        raise UsageError(f"{key}: expected an integer, got {raw!r}") from err


def _parse_float_list(raw, key):
    return tuple(_parse_float(tok, key) for tok in raw.split(",") if tok.strip())


def _parse_auto(raw, key):
    if raw.strip().lower() in ("auto", ""):
        return None
    return _parse_float(raw, key)


@dataclass
class ExperimentConfig:
    """Typed view of a fully merged key=value configuration."""

    raw: dict = field(default_factory=dict)
    csv_path: str = ""
    schema: CsvSchema = field(default_factory=CsvSchema)
    synth: SynthConfig = field(default_factory=SynthConfig)
    bin_seconds: int = 600
    window_seconds: int = 3600
    on_threshold: float = 15.0
    train_fraction: float = 0.10
    seed: int = 0
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    out_dir: str = "out"
    keep: bool = False

    @property
    def uses_synth(self):
        return not self.csv_path

    def echo(self) -> dict:
        """The resolved flat configuration, all values as strings."""
        return dict(sorted(self.raw.items()))


def resolve_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Merge defaults, config-file values, and CLI overrides into a typed config."""
    raw = dict(DEFAULTS)
    raw.update(file_values or {})
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})

    for key in raw:
        if key not in DEFAULTS:
            raise UsageError(f"unknown config key {key!r}")

    method = raw["solver.method"].strip().lower()
    if method not in METHODS:
        raise UsageError(f"solver.method must be one of {METHODS}, got {raw['solver.method']!r}")
    solver = SolverConfig(
        method=method,
        max_sparsity=_parse_int(raw["solver.max_sparsity"], "solver.max_sparsity"),
        lam=_parse_auto(raw["solver.lambda"], "solver.lambda"),
        max_iterations=_parse_int(raw["solver.max_iterations"], "solver.max_iterations"),
        tolerance=_parse_auto(raw["solver.tolerance"], "solver.tolerance"),
    )
    classifier = ClassifierConfig(
        tau=_parse_float(raw["tau"], "tau"),
        vacancy_norm_threshold=_parse_float(raw["vacancy_norm_threshold"], "vacancy_norm_threshold"),
        solver=solver,
    )

    appliances = None
    if raw["schema.appliances"].strip():
        appliances = {}
        for token in raw["schema.appliances"].split(","):
            token = token.strip()
            if not token:
                continue
            name, sep, col = token.partition(":")
            appliances[name.strip()] = col.strip() if sep else name.strip()
    schema = CsvSchema(
        timestamp=raw["schema.timestamp"].strip(),
        aggregate=raw["schema.aggregate"].strip(),
        appliances=appliances,
    )

    seed = _parse_int(raw["seed"], "seed")
    names_raw = raw["synth.appliance_names"].strip()
    synth = SynthConfig(
        num_appliances=_parse_int(raw["synth.num_appliances"], "synth.num_appliances"),
        rated_powers=_parse_float_list(raw["synth.rated_powers"], "synth.rated_powers"),
        on_to_on=_parse_float_list(raw["synth.on_to_on"], "synth.on_to_on"),
        off_to_off=_parse_float_list(raw["synth.off_to_off"], "synth.off_to_off"),
        noise_std=_parse_float(raw["synth.noise_std"], "synth.noise_std"),
        duration_hours=_parse_int(raw["synth.duration_hours"], "synth.duration_hours"),
        seed=seed,
        appliance_names=tuple(t.strip() for t in names_raw.split(",")) if names_raw else None,
    )

    train_fraction = _parse_float(raw["train_fraction"], "train_fraction")
    if not 0.0 < train_fraction < 1.0:
        raise UsageError("train_fraction must lie strictly between 0 and 1")

    return ExperimentConfig(
        raw=raw,
        csv_path=raw["data.csv"].strip(),
        schema=schema,
        synth=synth,
        bin_seconds=_parse_int(raw["bin_seconds"], "bin_seconds"),
        window_seconds=_parse_int(raw["window_seconds"], "window_seconds"),
        on_threshold=_parse_float(raw["on_threshold"], "on_threshold"),
        train_fraction=train_fraction,
        seed=seed,
        classifier=classifier,
        out_dir=raw["out"].strip(),
        keep=_parse_bool(raw["keep"], "keep"),
    )
