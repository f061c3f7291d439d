"""Kernel two-sample statistics and MMD-driven domain-adaptive training.

The package provides Gaussian(-mixture) kernels with median-heuristic
bandwidths, biased/unbiased MMD estimators with analytic gradients, a
permutation two-sample test, a CORAL baseline, a small feedforward
classifier trained on a joint cross-entropy + discrepancy objective, and
the surrounding tooling: synthetic shifted datasets, CSV ingestion,
classification reports and a CLI.
"""

from .benchmark import DEFAULT_SHIFT, MethodSummary, run_benchmark
from .coral import coral_gradient, coral_loss
from .datasets import LabeledDataset, ShiftSpec, generate, load_csv, save_csv
from .estimator import DomainAdaptedMlpClassifier
from .exceptions import (
    CsvParseError,
    DegenerateDataError,
    InputError,
    TrainingDivergedError,
)
from .kernels import (
    KernelMatrix,
    KernelSpec,
    eval_kernel,
    gram,
    median_heuristic,
    resolve,
)
from .metrics import (
    ClassificationReport,
    ConfusionMatrix,
    confusion,
    format_report_records,
    format_report_table,
    report,
)
from .mlp import (
    ForwardTrace,
    MlpModel,
    backward,
    cross_entropy,
    forward,
    init_model,
    load_checkpoint,
    predict_labels,
    save_checkpoint,
    softmax,
)
from .mmd import (
    MmdEstimate,
    PermutationTestResult,
    mmd_biased,
    mmd_gradient,
    mmd_unbiased,
    permutation_test,
)
from .training import (
    EpochMetrics,
    EvalResult,
    ExperimentConfig,
    SgdOptimizer,
    evaluate,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "CsvParseError",
    "ClassificationReport",
    "ConfusionMatrix",
    "DEFAULT_SHIFT",
    "DegenerateDataError",
    "DomainAdaptedMlpClassifier",
    "EpochMetrics",
    "EvalResult",
    "ExperimentConfig",
    "ForwardTrace",
    "InputError",
    "KernelMatrix",
    "KernelSpec",
    "LabeledDataset",
    "MethodSummary",
    "MlpModel",
    "MmdEstimate",
    "PermutationTestResult",
    "SgdOptimizer",
    "ShiftSpec",
    "TrainingDivergedError",
    "backward",
    "confusion",
    "coral_gradient",
    "coral_loss",
    "cross_entropy",
    "eval_kernel",
    "evaluate",
    "format_report_records",
    "format_report_table",
    "forward",
    "generate",
    "gram",
    "init_model",
    "load_checkpoint",
    "load_csv",
    "median_heuristic",
    "mmd_biased",
    "mmd_gradient",
    "mmd_unbiased",
    "permutation_test",
    "predict_labels",
    "report",
    "resolve",
    "run_benchmark",
    "save_checkpoint",
    "save_csv",
    "softmax",
    "train",
]
