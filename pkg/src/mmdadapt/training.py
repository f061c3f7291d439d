"""Joint-objective training: cross-entropy on labeled source data plus a
weighted distribution-alignment loss between source and target minibatch
representations.

Every step draws one source batch (reshuffled per epoch) and one target
batch (independently shuffled, cycled when the target set is smaller),
computes

    loss = class_loss + sum_i lambda_i * adapt_loss(tap_i)

and applies SGD with momentum, per-layer learning rates (the final layer
runs faster) and weight decay on weights only. Runs are deterministic for
a fixed seed: the model init, source order and target order each use a
disjoint substream of the seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import coral, mlp
from .datasets import LabeledDataset
from .exceptions import DegenerateDataError, InputError, TrainingDivergedError
from .kernels import KernelSpec, resolve
from .metrics import ClassificationReport, confusion, report
from .mmd import mmd_biased, mmd_gradient
from .validation import as_features

ADAPT_RKHS_MMD = "rkhs-mmd"
ADAPT_STANDARD_MMD = "standard-mmd"
ADAPT_CORAL = "coral"
ADAPT_NONE = "none"
ADAPT_CHOICES = (ADAPT_RKHS_MMD, ADAPT_STANDARD_MMD, ADAPT_CORAL, ADAPT_NONE)

#: The fixed bandwidth that operationalizes the plain single-kernel MMD
#: baseline; the richer variant recomputes a median-heuristic mixture per
#: minibatch instead.
STANDARD_MMD_SIGMA = 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    """Hyperparameters of one training run.

    ``lambdas`` has one weight per tapped layer. ``tap_layers=None`` taps
    the layer feeding the final classifier (the penultimate activation).
    ``kernel=None`` derives the kernel from ``adapt_loss``: a per-batch
    median-heuristic mixture for ``rkhs-mmd``, a fixed sigma=1 Gaussian for
    ``standard-mmd``. ``lambda_ramp_epochs=k`` scales the adaptation weight
    linearly from 0 to ``lambdas`` over the first k epochs.
    """

    adapt_loss: str = ADAPT_RKHS_MMD
    lambdas: tuple[float, ...] = (0.5,)
    tap_layers: tuple[int, ...] | None = None
    hidden_dims: tuple[int, ...] = (64, 32)
    batch_size: int = 32
    epochs: int = 50
    base_lr: float = 1e-3
    fc_lr_multiplier: float = 10.0
    weight_decay: float = 5e-4
    momentum: float = 0.9
    lambda_ramp_epochs: int = 0
    seed: int = 0
    kernel: KernelSpec | None = None

    def __post_init__(self):
        if self.adapt_loss not in ADAPT_CHOICES:
            raise InputError(f"adapt_loss must be one of {ADAPT_CHOICES}, got {self.adapt_loss!r}")
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        object.__setattr__(self, "hidden_dims", tuple(int(v) for v in self.hidden_dims))
        if self.tap_layers is not None:
            object.__setattr__(self, "tap_layers", tuple(int(v) for v in self.tap_layers))
        if any(v < 0 for v in self.lambdas):
            raise InputError("lambda weights must be nonnegative")
        if self.tap_layers is not None:
            if len(self.tap_layers) != len(self.lambdas):
                raise InputError(
                    f"{len(self.lambdas)} lambda weights for {len(self.tap_layers)} tap layers"
                )
            if len(set(self.tap_layers)) != len(self.tap_layers):
                raise InputError("tap_layers must be distinct")
        elif len(self.lambdas) != 1:
            raise InputError("without explicit tap_layers exactly one lambda is expected")
        min_batch = 2 if self.adapt_loss != ADAPT_NONE else 1
        if self.batch_size < min_batch:
            raise InputError(f"batch_size must be >= {min_batch} for adapt_loss={self.adapt_loss}")
        if self.epochs < 1:
            raise InputError("epochs must be >= 1")
        for name in ("base_lr", "fc_lr_multiplier", "weight_decay", "momentum"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InputError(f"{name} must be finite and nonnegative")
        if self.lambda_ramp_epochs < 0:
            raise InputError("lambda_ramp_epochs must be >= 0")
        if any(d < 1 for d in self.hidden_dims):
            raise InputError("hidden layer widths must be >= 1")

    def resolved_kernel(self) -> KernelSpec | None:
        if self.adapt_loss in (ADAPT_CORAL, ADAPT_NONE):
            return None
        if self.kernel is not None:
            return self.kernel
        if self.adapt_loss == ADAPT_RKHS_MMD:
            return KernelSpec.median_mixture()
        return KernelSpec.gaussian(STANDARD_MMD_SIGMA)


@dataclass(frozen=True)
class EpochMetrics:
    """Per-epoch log record. ``class_loss`` and ``adapt_loss_value`` are
    means over the epoch's steps; the adaptation value is unweighted (no
    lambda), so it tracks the raw discrepancy."""

    epoch: int
    class_loss: float
    adapt_loss_value: float
    source_accuracy: float
    target_accuracy: float | None
    macro_f1_target: float | None
    wall_time_seconds: float


@dataclass(frozen=True)
class StepRecord:
    """Per-step accounting handed to the optional ``on_step`` callback."""

    epoch: int
    step: int
    class_loss: float
    adapt_values: tuple[float, ...]
    effective_lambdas: tuple[float, ...]
    joint_loss: float


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    report: ClassificationReport
    predictions: np.ndarray


class SgdOptimizer:
    """SGD with momentum, per-layer learning rates and decoupled-from-bias
    weight decay:

        v <- momentum * v - lr_layer * (g + weight_decay * w);  w <- w + v

    Bias vectors are exempt from weight decay. The final layer uses
    base_lr * fc_lr_multiplier, all others base_lr.
    """

    def __init__(self, model: mlp.MlpModel, base_lr: float, fc_lr_multiplier: float,
                 momentum: float, weight_decay: float):
        n = len(model.layers)
        self.learning_rates = [base_lr] * (n - 1) + [base_lr * fc_lr_multiplier]
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = [
            (np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in model.layers
        ]

    def step(self, model: mlp.MlpModel, grads) -> None:
        if len(grads) != len(model.layers):
            raise RuntimeError("gradient list does not match model layers")
        for layer, (g_w, g_b), (v_w, v_b), lr in zip(
            model.layers, grads, self.velocity, self.learning_rates
        ):
            if v_w.shape != layer.weight.shape or v_b.shape != layer.bias.shape:
                raise RuntimeError("momentum buffer shape drifted from model parameters")
            v_w *= self.momentum
            v_w -= lr * (g_w + self.weight_decay * layer.weight)
            layer.weight += v_w
            v_b *= self.momentum
            v_b -= lr * g_b
            layer.bias += v_b


class _BatchCycler:
    """Endless shuffled index batches over n items; reshuffles on wrap."""

    def __init__(self, n: int, rng: np.random.Generator):
        self.n = n
        self.rng = rng
        self.order = rng.permutation(n)
        self.pos = 0

    def next(self, size: int) -> np.ndarray:
        out = np.empty(size, dtype=np.int64)
        filled = 0
        while filled < size:
            if self.pos == self.n:
                self.order = self.rng.permutation(self.n)
                self.pos = 0
            take = min(size - filled, self.n - self.pos)
            out[filled:filled + take] = self.order[self.pos:self.pos + take]
            self.pos += take
            filled += take
        return out


def _sum_grads(a, b):
    return [(gw1 + gw2, gb1 + gb2) for (gw1, gb1), (gw2, gb2) in zip(a, b)]


def _adapt_term(adapt_loss: str, kernel: KernelSpec | None, reps_s, reps_t):
    """One tap's discrepancy value and gradients for the current step.

    A median-heuristic kernel is resolved on the pooled tapped batch and
    held constant through the gradient. When the pooled representation is
    fully degenerate (the median pairwise distance is zero, typically a
    collapsed layer), the term contributes zero value and zero gradient.
    """
    if adapt_loss == ADAPT_CORAL:
        return coral.coral_loss(reps_s, reps_t), coral.coral_gradient(reps_s, reps_t)
    try:
        spec = resolve(kernel, reps_s, reps_t)
    except DegenerateDataError:
        return 0.0, (np.zeros_like(reps_s), np.zeros_like(reps_t))
    value = mmd_biased(spec, reps_s, reps_t).value
    return value, mmd_gradient(spec, reps_s, reps_t)


def train(
    config: ExperimentConfig,
    source: LabeledDataset,
    target_features=None,
    eval_target: LabeledDataset | None = None,
    on_step=None,
) -> tuple[mlp.MlpModel, list[EpochMetrics]]:
    """Run the joint training loop; returns the model and per-epoch metrics.

    ``target_features`` is required (and its labels are never consulted)
    whenever ``config.adapt_loss`` is not ``"none"``. ``eval_target`` adds
    target accuracy and macro F1 to the per-epoch log. Batches are drawn
    without replacement per epoch; a ragged final source batch is dropped
    so every step sees a full, discrepancy-capable batch.

    Raises
    ------
    TrainingDivergedError
        On the first non-finite loss, naming the step and component.
    """
    adapting = config.adapt_loss != ADAPT_NONE
    if source.n < config.batch_size:
        raise InputError(f"source has {source.n} samples, batch_size is {config.batch_size}")
    if adapting:
        if target_features is None:
            raise InputError(f"adapt_loss={config.adapt_loss} requires target features")
        target_features = as_features(target_features, name="target_features")
        if target_features.shape[1] != source.d:
            raise InputError(
                f"target features have dimension {target_features.shape[1]}, source has {source.d}"
            )
        if target_features.shape[0] < config.batch_size:
            raise InputError(
                f"target has {target_features.shape[0]} samples, batch_size is {config.batch_size}"
            )

    model_ss, source_ss, target_ss = np.random.SeedSequence(config.seed).spawn(3)
    layer_dims = (source.d, *config.hidden_dims, source.n_classes)
    model = mlp.init_model(layer_dims, model_ss)
    n_layers = len(model.layers)
    taps = config.tap_layers if config.tap_layers is not None else (max(0, n_layers - 2),)
    if any(not 0 <= t < n_layers for t in taps):
        raise InputError(f"tap_layers {taps} out of range for {n_layers} layers")
    kernel = config.resolved_kernel()

    optimizer = SgdOptimizer(
        model, config.base_lr, config.fc_lr_multiplier, config.momentum, config.weight_decay
    )
    source_rng = np.random.default_rng(source_ss)
    target_cycler = (
        _BatchCycler(target_features.shape[0], np.random.default_rng(target_ss))
        if adapting
        else None
    )

    steps_per_epoch = source.n // config.batch_size
    history: list[EpochMetrics] = []
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = source_rng.permutation(source.n)
        class_losses = np.empty(steps_per_epoch)
        adapt_totals = np.zeros(steps_per_epoch)
        ramp = 1.0
        if config.lambda_ramp_epochs > 0:
            ramp = min(1.0, epoch / config.lambda_ramp_epochs)
        for step in range(steps_per_epoch):
            idx = order[step * config.batch_size:(step + 1) * config.batch_size]
            xb, yb = source.features[idx], source.labels[idx]
            trace_s = mlp.forward(model, xb)
            class_loss = mlp.cross_entropy(trace_s, yb)

            adapt_values: list[float] = []
            effective: list[float] = []
            weighted_total = 0.0
            tap_grads_s: dict[int, np.ndarray] = {}
            tap_grads_t: dict[int, np.ndarray] = {}
            trace_t = None
            if adapting:
                tb = target_features[target_cycler.next(config.batch_size)]
                trace_t = mlp.forward(model, tb)
                for lam, tap in zip(config.lambdas, taps):
                    lam_eff = lam * ramp
                    value, (g_s, g_t) = _adapt_term(
                        config.adapt_loss, kernel,
                        trace_s.activations[tap], trace_t.activations[tap],
                    )
                    adapt_values.append(value)
                    effective.append(lam_eff)
                    weighted_total += lam_eff * value
                    tap_grads_s[tap] = lam_eff * g_s
                    tap_grads_t[tap] = lam_eff * g_t

            joint = class_loss + weighted_total
            if not math.isfinite(joint):
                parts = f"class_loss={class_loss!r}, adapt_values={adapt_values!r}"
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch + 1}, step {step + 1}: {parts}"
                )

            grads = mlp.backward(model, trace_s, yb, tap_grads_s or None)
            if adapting:
                grads = _sum_grads(grads, mlp.backward(model, trace_t, None, tap_grads_t))
            optimizer.step(model, grads)

            class_losses[step] = class_loss
            adapt_totals[step] = math.fsum(adapt_values)
            if on_step is not None:
                on_step(StepRecord(
                    epoch=epoch + 1, step=step + 1, class_loss=class_loss,
                    adapt_values=tuple(adapt_values), effective_lambdas=tuple(effective),
                    joint_loss=joint,
                ))

        source_eval = evaluate(model, source)
        target_accuracy = macro_f1 = None
        if eval_target is not None:
            target_eval = evaluate(model, eval_target)
            target_accuracy = target_eval.accuracy
            macro_f1 = target_eval.report.macro_f1
        history.append(EpochMetrics(
            epoch=epoch + 1,
            class_loss=float(class_losses.mean()),
            adapt_loss_value=float(adapt_totals.mean()),
            source_accuracy=source_eval.accuracy,
            target_accuracy=target_accuracy,
            macro_f1_target=macro_f1,
            wall_time_seconds=time.perf_counter() - t0,
        ))
    return model, history


def evaluate(model: mlp.MlpModel, dataset: LabeledDataset) -> EvalResult:
    """Accuracy plus the full per-class report for a labeled dataset.

    Predictions are row-wise argmax of the class probabilities; ties break
    toward the smaller class index.
    """
    if dataset.n == 0:
        raise InputError("cannot evaluate on an empty dataset")
    if dataset.d != model.input_dim:
        raise InputError(
            f"dataset dimension {dataset.d} does not match model input {model.input_dim}"
        )
    if dataset.n_classes != model.n_classes:
        raise InputError(
            f"dataset has {dataset.n_classes} classes, model predicts {model.n_classes}"
        )
    predictions = mlp.predict_labels(model, dataset.features)
    accuracy = float(np.mean(predictions == dataset.labels))
    cm = confusion(dataset.labels, predictions, dataset.n_classes, dataset.class_names)
    return EvalResult(accuracy=accuracy, report=report(cm), predictions=predictions)


# ---------------------------------------------------------------------------
# Metrics log serialization (one machine-parsable record per epoch)
# ---------------------------------------------------------------------------

METRICS_FIELDS = (
    "epoch", "class_loss", "adapt_loss", "source_accuracy", "target_accuracy",
    "target_macro_f1",
)


def format_metrics_line(m: EpochMetrics) -> str:
    """Stable key=value record; floats use repr so logs are byte-reproducible.

    Wall time is intentionally not serialized: it would make otherwise
    identical runs differ.
    """
    def fmt(v):
        return "none" if v is None else repr(float(v))

    return (
        f"epoch={m.epoch} class_loss={fmt(m.class_loss)} "
        f"adapt_loss={fmt(m.adapt_loss_value)} "
        f"source_accuracy={fmt(m.source_accuracy)} "
        f"target_accuracy={fmt(m.target_accuracy)} "
        f"target_macro_f1={fmt(m.macro_f1_target)}"
    )


def write_metrics_log(path, history) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for m in history:
            fh.write(format_metrics_line(m) + "\n")


def parse_metrics_line(line: str) -> dict:
    """Inverse of :func:`format_metrics_line` (values as float/int/None)."""
    out = {}
    for part in line.split():
        key, _, value = part.partition("=")
        if value == "none":
            out[key] = None
        elif key == "epoch":
            out[key] = int(value)
        else:
            out[key] = float(value)
    return out
