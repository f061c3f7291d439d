"""Flat ``key = value`` configuration files.

One format serves three uses: training configs, synthetic-shift specs and
benchmark suites (a suite is simply both key sets in one file). Blank
lines and ``#`` comments are ignored; unknown keys are rejected rather
than silently dropped.

Training keys (defaults in parentheses):

    adapt_loss          rkhs-mmd | standard-mmd | coral | none  (rkhs-mmd)
    lambda              comma list of nonnegative weights       (0.5)
    tap_layers          comma list of layer indices             (penultimate)
    hidden_dims         comma list of widths                    (64,32)
    batch_size          int                                     (32)
    epochs              int                                     (50)
    base_lr             float                                   (0.001)
    fc_lr_multiplier    float                                   (10)
    weight_decay        float                                   (0.0005)
    momentum            float                                   (0.9)
    lambda_ramp_epochs  int                                     (0)
    seed                int                                     (0)
    kernel_family       gaussian | mixture                      (derived)
    kernel_sigma        float | median                          (derived)

Shift keys:

    generator           gaussian-mixture | two-arcs             (two-arcs)
    n_per_class         int                                     (500)
    d                   int                                     (2)
    rotation_degrees    float                                   (0)
    translation         comma list of d floats                  (none)
    noise_scale         float                                   (0.15)
    class_imbalance     float in (0,1) | none                   (none)
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from .datasets import ShiftSpec
from .exceptions import InputError
from .kernels import DEFAULT_MIXTURE_MULTIPLIERS, KernelSpec
from .training import ExperimentConfig


def parse_kv_text(text: str, *, source: str = "config") -> dict[str, str]:
    """Parse flat ``key = value`` lines into a string mapping."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"{source}: line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise InputError(f"{source}: line {lineno}: empty key")
        if key in out:
            raise InputError(f"{source}: line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_kv_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: no such file")
    return parse_kv_text(path.read_text(encoding="utf-8"), source=str(path))


def _float(key, value):
    try:
        return float(value)
    except ValueError:
        raise InputError(f"{key}: expected a number, got {value!r}") from None


def _int(key, value):
    try:
        return int(value)
    except ValueError:
        raise InputError(f"{key}: expected an integer, got {value!r}") from None


def _float_list(key, value):
    if not value:
        return ()
    return tuple(_float(key, item) for item in value.split(","))


def _int_list(key, value):
    if not value:
        return ()
    return tuple(_int(key, item) for item in value.split(","))


def build_kernel(family: str | None, sigma: str | None) -> KernelSpec | None:
    """Kernel from the two config knobs; None when both are unset.

    ``family`` is ``gaussian`` (one component) or ``mixture`` (the default
    geometric five-bandwidth grid); ``sigma`` is a number or ``median``.
    Omitted halves default to family ``gaussian`` and sigma ``median``.
    """
    if family is None and sigma is None:
        return None
    family = family or "gaussian"
    sigma = sigma if sigma is not None else "median"
    if family in ("mixture", "gaussian-mixture"):
        if sigma == "median":
            return KernelSpec.median_mixture()
        s = _float("kernel_sigma", sigma)
        return KernelSpec.mixture(tuple(m * s for m in DEFAULT_MIXTURE_MULTIPLIERS))
    if family == "gaussian":
        if sigma == "median":
            return KernelSpec.median_gaussian()
        return KernelSpec.gaussian(_float("kernel_sigma", sigma))
    raise InputError(f"kernel_family: expected gaussian or mixture, got {family!r}")


_TRAIN_KEYS = {
    "adapt_loss", "lambda", "tap_layers", "hidden_dims", "batch_size", "epochs",
    "base_lr", "fc_lr_multiplier", "weight_decay", "momentum",
    "lambda_ramp_epochs", "seed", "kernel_family", "kernel_sigma",
}

_SHIFT_KEYS = {
    "generator", "n_per_class", "d", "rotation_degrees", "translation",
    "noise_scale", "class_imbalance",
}


def experiment_config_from_mapping(
    kv: dict[str, str],
    *,
    source: str = "config",
    base: ExperimentConfig | None = None,
) -> ExperimentConfig:
    """Config from a parsed mapping; unset keys fall back to ``base``
    (or the stock defaults)."""
    unknown = set(kv) - _TRAIN_KEYS
    if unknown:
        raise InputError(f"{source}: unknown keys: {', '.join(sorted(unknown))}")
    kwargs = {}
    if "adapt_loss" in kv:
        kwargs["adapt_loss"] = kv["adapt_loss"]
    if "lambda" in kv:
        kwargs["lambdas"] = _float_list("lambda", kv["lambda"])
    if "tap_layers" in kv:
        kwargs["tap_layers"] = _int_list("tap_layers", kv["tap_layers"])
    if "hidden_dims" in kv:
        kwargs["hidden_dims"] = _int_list("hidden_dims", kv["hidden_dims"])
    for key, parser in (
        ("batch_size", _int), ("epochs", _int), ("lambda_ramp_epochs", _int),
        ("seed", _int), ("base_lr", _float), ("fc_lr_multiplier", _float),
        ("weight_decay", _float), ("momentum", _float),
    ):
        if key in kv:
            kwargs[key] = parser(key, kv[key])
    kernel = build_kernel(kv.get("kernel_family"), kv.get("kernel_sigma"))
    if kernel is not None:
        kwargs["kernel"] = kernel
    if base is not None:
        return replace(base, **kwargs)
    return ExperimentConfig(**kwargs)


def shift_spec_from_mapping(kv: dict[str, str], *, source: str = "config") -> ShiftSpec:
    unknown = set(kv) - _SHIFT_KEYS
    if unknown:
        raise InputError(f"{source}: unknown keys: {', '.join(sorted(unknown))}")
    kwargs = {}
    if "generator" in kv:
        kwargs["generator"] = kv["generator"]
    for key, parser in (
        ("n_per_class", _int), ("d", _int),
        ("rotation_degrees", _float), ("noise_scale", _float),
    ):
        if key in kv:
            kwargs[key] = parser(key, kv[key])
    if "translation" in kv:
        kwargs["translation"] = _float_list("translation", kv["translation"])
    if "class_imbalance" in kv and kv["class_imbalance"] != "none":
        kwargs["class_imbalance"] = _float("class_imbalance", kv["class_imbalance"])
    return ShiftSpec(**kwargs)


def load_experiment_config(path) -> ExperimentConfig:
    return experiment_config_from_mapping(parse_kv_file(path), source=str(path))


def load_shift_spec(path) -> ShiftSpec:
    return shift_spec_from_mapping(parse_kv_file(path), source=str(path))


def load_suite(
    path, base: ExperimentConfig | None = None
) -> tuple[ShiftSpec, ExperimentConfig, frozenset[str]]:
    """A suite file mixes shift and training keys in one mapping.

    ``adapt_loss`` and ``seed`` are rejected: the benchmark iterates both.
    Unset training keys fall back to ``base``. Returns the shift spec, the
    base training config and the set of training keys the file set
    explicitly (so callers can tell a stated value from a default).
    """
    kv = parse_kv_file(path)
    source = str(path)
    for forbidden in ("adapt_loss", "seed"):
        if forbidden in kv:
            raise InputError(
                f"{source}: {forbidden!r} is controlled by the benchmark and "
                "cannot be set in a suite file"
            )
    unknown = set(kv) - _TRAIN_KEYS - _SHIFT_KEYS
    if unknown:
        raise InputError(f"{source}: unknown keys: {', '.join(sorted(unknown))}")
    shift_kv = {k: v for k, v in kv.items() if k in _SHIFT_KEYS}
    train_kv = {k: v for k, v in kv.items() if k in _TRAIN_KEYS}
    return (
        shift_spec_from_mapping(shift_kv, source=source),
        experiment_config_from_mapping(train_kv, source=source, base=base),
        frozenset(train_kv),
    )
