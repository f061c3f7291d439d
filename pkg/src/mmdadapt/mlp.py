"""A small feedforward classifier with exact analytic backpropagation.

Double precision throughout; gradient checks against central finite
differences are only meaningful at the tolerances used here in float64.
The final layer always has identity activation and produces logits; hidden
layers use ReLU.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import InputError
from .validation import as_features, as_labels

RELU = "relu"
IDENTITY = "identity"

#: Probabilities are clamped here before the log so saturated wrong
#: predictions yield a large finite loss instead of -inf.
PROB_FLOOR = 1e-12

#: Final-layer weights are drawn from N(0, std=0.005); hidden layers use
#: fan-in scaling with variance 2/d_in.
FINAL_LAYER_STD = 0.005

CHECKPOINT_FORMAT = "mmdadapt-mlp"
CHECKPOINT_VERSION = 1


@dataclass
class Layer:
    weight: np.ndarray  # (d_in, d_out)
    bias: np.ndarray  # (d_out,)
    activation: str

    def __post_init__(self):
        if self.activation not in (RELU, IDENTITY):
            raise InputError(f"unknown activation {self.activation!r}")
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise InputError("layer weight must be (d_in, d_out) with matching bias")
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise InputError("layer parameters must be finite")


@dataclass
class MlpModel:
    """Ordered affine+activation layers; the last layer emits C logits."""

    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise InputError("model needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.weight.shape[1] != nxt.weight.shape[0]:
                raise InputError(
                    f"layer dimensions do not chain: {prev.weight.shape} -> {nxt.weight.shape}"
                )
        if self.layers[-1].activation != IDENTITY:
            raise InputError("final layer must have identity activation")

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def n_classes(self) -> int:
        return self.layers[-1].weight.shape[1]

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim,) + tuple(l.weight.shape[1] for l in self.layers)

    def copy(self) -> "MlpModel":
        return MlpModel(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )


@dataclass
class ForwardTrace:
    """Everything the backward pass needs from one forward pass.

    ``activations[i]`` is the output of ``layers[i]``; the tap layer index
    marks which of those feeds a discrepancy loss.
    """

    inputs: np.ndarray
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]
    probabilities: np.ndarray
    tap_layer: int | None = None
    logits: np.ndarray = field(init=False)

    def __post_init__(self):
        self.logits = self.activations[-1]

    def tapped(self, layer: int | None = None) -> np.ndarray:
        idx = self.tap_layer if layer is None else layer
        if idx is None:
            raise InputError("no tap layer was marked on this trace")
        return self.activations[idx]


def init_model(layer_dims, seed) -> MlpModel:
    """Create a model for the given dimension chain, deterministically.

    ``layer_dims`` is (d_in, hidden..., C). Hidden weights are N(0, 2/d_in)
    (ReLU fan-in scaling), the final layer N(0, std=0.005); all biases 0.
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise InputError("layer_dims needs an input and an output dimension")
    if any(d < 1 for d in dims):
        raise InputError("every layer dimension must be >= 1")
    rng = np.random.default_rng(seed)
    layers = []
    for i, (d_in, d_out) in enumerate(zip(dims, dims[1:])):
        last = i == len(dims) - 2
        std = FINAL_LAYER_STD if last else np.sqrt(2.0 / d_in)
        weight = rng.normal(0.0, std, size=(d_in, d_out))
        layers.append(Layer(weight, np.zeros(d_out), IDENTITY if last else RELU))
    return MlpModel(layers)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for overflow safety."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def forward(model: MlpModel, X, tap_layer: int | None = None) -> ForwardTrace:
    """Run the affine+activation chain on a batch; mark ``tap_layer``.

    ``tap_layer`` indexes the layer whose activation is handed to the
    discrepancy loss; it is recorded on the trace, not acted on here.
    """
    X = as_features(X, name="X")
    if X.shape[1] != model.input_dim:
        raise InputError(f"input has {X.shape[1]} features, model expects {model.input_dim}")
    if tap_layer is not None and not (0 <= tap_layer < len(model.layers)):
        raise InputError(f"tap_layer {tap_layer} out of range for {len(model.layers)} layers")
    pre, act = [], []
    a = X
    for layer in model.layers:
        z = a @ layer.weight + layer.bias
        a = np.maximum(z, 0.0) if layer.activation == RELU else z
        pre.append(z)
        act.append(a)
    return ForwardTrace(X, pre, act, softmax(act[-1]), tap_layer=tap_layer)


def cross_entropy(trace: ForwardTrace, labels) -> float:
    """Mean negative log-probability of the true class.

    Probabilities are clamped at 1e-12 before the log.
    """
    n, n_classes = trace.probabilities.shape
    y = as_labels(labels, n_classes, n_rows=n)
    picked = trace.probabilities[np.arange(n), y]
    return float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())


def _normalize_tap_grads(trace: ForwardTrace, upstream, n_layers: int) -> dict[int, np.ndarray]:
    if upstream is None:
        return {}
    if isinstance(upstream, dict):
        items = upstream.items()
    else:
        if trace.tap_layer is None:
            raise InputError("upstream gradient given but the trace has no tap layer")
        items = [(trace.tap_layer, upstream)]
    out = {}
    for idx, grad in items:
        if not (0 <= idx < n_layers):
            raise InputError(f"tap index {idx} out of range")
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != trace.activations[idx].shape:
            raise InputError(
                f"upstream gradient shape {grad.shape} does not match tapped "
                f"activation shape {trace.activations[idx].shape}"
            )
        out[idx] = grad
    return out


def backward(
    model: MlpModel,
    trace: ForwardTrace,
    labels=None,
    upstream_mmd_grad=None,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Exact gradients of the joint loss for every weight and bias.

    The classification term contributes (softmax - onehot)/n at the logits;
    ``upstream_mmd_grad`` (an array for the trace's tap layer, or a dict
    mapping layer index to array) is added to the gradient of the matching
    activation on the way down. ``labels=None`` drops the classification
    term, which is how the unlabeled-domain half of a discrepancy loss is
    propagated.

    Returns
    -------
    list of (d_weight, d_bias) in layer order.
    """
    n = trace.inputs.shape[0]
    n_layers = len(model.layers)
    taps = _normalize_tap_grads(trace, upstream_mmd_grad, n_layers)

    if labels is not None:
        y = as_labels(labels, model.n_classes, n_rows=n)
        delta_act = trace.probabilities.copy()
        delta_act[np.arange(n), y] -= 1.0
        delta_act /= n
    else:
        delta_act = np.zeros_like(trace.logits)
    if n_layers - 1 in taps:
        delta_act = delta_act + taps[n_layers - 1]

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        layer = model.layers[i]
        if layer.activation == RELU:
            delta_z = delta_act * (trace.pre_activations[i] > 0.0)
        else:
            delta_z = delta_act
        below = trace.inputs if i == 0 else trace.activations[i - 1]
        grads[i] = (below.T @ delta_z, delta_z.sum(axis=0))
        if i > 0:
            delta_act = delta_z @ layer.weight.T
            if i - 1 in taps:
                delta_act = delta_act + taps[i - 1]
    return grads


def predict_labels(model: MlpModel, X) -> np.ndarray:
    """Argmax class per row; ties resolve to the smaller class index."""
    return np.argmax(forward(model, X).probabilities, axis=1)


def save_checkpoint(model: MlpModel, path, metadata: dict | None = None) -> None:
    """Write the model as versioned JSON (stable and byte-deterministic).

    Parameters are stored as nested lists of Python floats, which
    round-trip float64 exactly through ``repr``.
    """
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layer_dims": list(model.layer_dims),
        "activations": [l.activation for l in model.layers],
        "metadata": metadata or {},
        "layers": [
            {"weight": l.weight.tolist(), "bias": l.bias.tolist()} for l in model.layers
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True), encoding="utf-8")


def load_checkpoint(path) -> tuple[MlpModel, dict]:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not a valid checkpoint file: {exc}") from exc
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise InputError(f"{path}: unrecognized checkpoint format {doc.get('format')!r}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise InputError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    layers = [
        Layer(np.array(entry["weight"]), np.array(entry["bias"]), activation)
        for entry, activation in zip(doc["layers"], doc["activations"])
    ]
    return MlpModel(layers), doc.get("metadata", {})
