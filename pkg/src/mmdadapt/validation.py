"""Input validation helpers used by the public entry points.

All array-accepting functions in this package funnel their inputs through
``as_features`` / ``as_labels`` so that shape and finiteness errors surface
as :class:`~mmdadapt.exceptions.InputError` with a usable message instead of
a numpy broadcast failure deep inside a computation.
"""

from __future__ import annotations

import numpy as np

from .exceptions import InputError


def as_features(X, *, name: str = "X", allow_empty: bool = False) -> np.ndarray:
    """Validate and return a feature matrix as a float64 array of shape (n, d).

    A 1-d input of length d is treated as a single sample. Rejects NaN and
    infinite entries, ragged rows and d = 0.
    """
    try:
        arr = np.asarray(X, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{name}: could not convert to a numeric array: {exc}") from exc
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise InputError(f"{name}: expected a 2-d array of shape (n, d), got ndim={arr.ndim}")
    if arr.shape[1] == 0:
        raise InputError(f"{name}: feature dimension must be >= 1")
    if not allow_empty and arr.shape[0] == 0:
        raise InputError(f"{name}: must contain at least one sample")
    if arr.size and not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise InputError(f"{name}: non-finite value at row {bad[0]}, column {bad[1]}")
    return arr


def check_same_dim(A: np.ndarray, B: np.ndarray, *, names: tuple[str, str] = ("A", "B")) -> None:
    """Raise InputError unless the two feature matrices share a dimension."""
    if A.shape[1] != B.shape[1]:
        raise InputError(
            f"{names[0]} and {names[1]} have mismatched feature dimensions: "
            f"{A.shape[1]} != {B.shape[1]}"
        )


def as_labels(y, n_classes: int, *, n_rows: int | None = None, name: str = "labels") -> np.ndarray:
    """Validate integer class labels in {0..n_classes-1}; returns an int array."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise InputError(f"{name}: expected a 1-d array, got ndim={arr.ndim}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        rounded = np.asarray(arr, dtype=np.float64)
        if not np.all(rounded == np.floor(rounded)):
            raise InputError(f"{name}: labels must be integers")
        arr = rounded.astype(np.int64)
    else:
        arr = arr.astype(np.int64)
    if n_rows is not None and arr.shape[0] != n_rows:
        raise InputError(f"{name}: length {arr.shape[0]} does not match {n_rows} samples")
    if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
        raise InputError(f"{name}: labels must lie in [0, {n_classes - 1}]")
    return arr


def as_positive_int(value, *, name: str, minimum: int = 1) -> int:
    """Coerce to int and require value >= minimum."""
    try:
        out = int(value)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{name}: expected an integer, got {value!r}") from exc
    if out < minimum:
        raise InputError(f"{name}: must be >= {minimum}, got {out}")
    return out
