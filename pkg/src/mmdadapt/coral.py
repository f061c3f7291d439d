"""Correlation-alignment (CORAL) loss: squared Frobenius distance between
the sample covariances of two feature sets, scaled by 1/(4 d^2).

Aligns second-order statistics only; a pure mean shift between domains is
invisible to it, which is the classic failure mode this baseline exists to
demonstrate.
"""

from __future__ import annotations

import numpy as np

from .exceptions import InputError
from .validation import as_features, check_same_dim


def _validated_pair(S, T):
    S = as_features(S, name="source")
    T = as_features(T, name="target")
    check_same_dim(S, T, names=("source", "target"))
    if S.shape[0] < 2 or T.shape[0] < 2:
        raise InputError(
            f"covariance needs at least 2 samples per side, got {S.shape[0]} and {T.shape[0]}"
        )
    return S, T


def _covariance(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample covariance with the unbiased n-1 divisor; also returns the
    centered data."""
    centered = X - X.mean(axis=0, keepdims=True)
    return centered.T @ centered / (X.shape[0] - 1), centered


def coral_loss(S, T) -> float:
    """||C_S - C_T||_F^2 / (4 d^2) with C the n-1 sample covariance."""
    S, T = _validated_pair(S, T)
    d = S.shape[1]
    c_s, _ = _covariance(S)
    c_t, _ = _covariance(T)
    diff = c_s - c_t
    return float((diff * diff).sum() / (4.0 * d * d))


def coral_gradient(S, T) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of :func:`coral_loss` with respect to both inputs.

    With D = (C_S - C_T) / (2 d^2), the gradients are
    2 S_c D / (n_s - 1) and -2 T_c D / (n_t - 1) where S_c, T_c are the
    row-centered inputs (centering contributes nothing further because the
    columns of S_c D already sum to zero).
    """
    S, T = _validated_pair(S, T)
    d = S.shape[1]
    c_s, s_centered = _covariance(S)
    c_t, t_centered = _covariance(T)
    grad_c = (c_s - c_t) / (2.0 * d * d)
    d_s = 2.0 * (s_centered @ grad_c) / (S.shape[0] - 1)
    d_t = -2.0 * (t_centered @ grad_c) / (T.shape[0] - 1)
    return d_s, d_t
