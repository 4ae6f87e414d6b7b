"""nilmsrc: appliance-state detection from aggregate smart-meter windows.

A test window is sparse-coded over a dictionary of labelled training
windows; every appliance class whose class-restricted reconstruction
lands within tau times the best one is predicted ON.
"""

from .classifier import (
    ClassifierConfig,
    DistanceProfile,
    TrainingDictionary,
    class_distance_profile,
    fit,
    load_model,
    predict_batch,
    predict_one,
    save_model,
)
from .dataset import (
    CsvSchema,
    Household,
    PowerTrace,
    SynthConfig,
    WindowedDataset,
    chronological_split,
    ingest_csv,
    resample_mean,
    synth_generate,
    windowize,
)
from .metrics import (
    ConfusionCounts,
    EvaluationReport,
    average_energy_error,
    confusion_counts,
    evaluate,
    f1,
    f1_macro,
    f1_micro,
    per_appliance_report,
    report_to_json,
    report_to_text,
)
from .solver import (
    DesignMatrix,
    SolverConfig,
    SparseCode,
    brute_force_sparse,
    normalize_columns,
    residual_norm,
    solve,
    solve_l1,
    solve_omp,
)

__version__ = "0.1.0"
