"""Empirical maximum mean discrepancy: estimators, gradients, permutation test.

The squared discrepancy between samples S = {x_i} and T = {u_j} under
kernel k is estimated by the three-term form

    (1/n_s^2) sum_ij k(x_i, x_j) + (1/n_t^2) sum_ij k(u_i, u_j)
        - (2/(n_s n_t)) sum_ij k(x_i, u_j)

with diagonal terms included (the V-statistic; always >= 0). The unbiased
U-statistic variant excludes the within-sample diagonals and divides by
n(n-1); it can go negative and exists for hypothesis testing, not for use
as a training loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import InputError
from .kernels import KernelSpec, gram, resolve
from .validation import as_features, as_positive_int, check_same_dim

#: Negative values of the biased estimator larger than this (in magnitude)
#: are genuine errors, not rounding residue, and are returned unclamped.
_ROUNDING_TOLERANCE = 1e-12

BIASED = "biased"
UNBIASED = "unbiased"


@dataclass(frozen=True)
class MmdEstimate:
    """An empirical MMD^2 value plus the configuration that produced it.

    ``kernel`` is the resolved spec snapshot: for median-heuristic inputs it
    records the concrete bandwidths used.
    """

    value: float
    estimator: str
    kernel: KernelSpec
    n_source: int
    n_target: int


@dataclass(frozen=True)
class PermutationTestResult:
    """Outcome of a two-sample permutation test on the biased MMD^2.

    ``p_value`` uses the add-one convention
    (1 + #{permuted >= observed}) / (1 + n_permutations), so it is never 0.
    """

    statistic: float
    p_value: float
    n_permutations: int
    null_quantiles: tuple[tuple[float, float], ...] = field(default=())


def _validated_pair(S, T, min_each: int):
    S = as_features(S, name="source")
    T = as_features(T, name="target")
    check_same_dim(S, T, names=("source", "target"))
    if S.shape[0] < min_each or T.shape[0] < min_each:
        raise InputError(
            f"estimator needs at least {min_each} samples per side, "
            f"got {S.shape[0]} and {T.shape[0]}"
        )
    return S, T


def mmd_biased(spec: KernelSpec, S, T) -> MmdEstimate:
    """Biased (V-statistic) MMD^2 estimate between two samples.

    Mathematically nonnegative; floating-point residue in [-1e-12, 0) is
    clamped to 0. A median-heuristic spec is resolved once on the pooled
    sample.
    """
    S, T = _validated_pair(S, T, min_each=1)
    spec = resolve(spec, S, T)
    k_ss = gram(spec, S).values
    k_tt = gram(spec, T).values
    k_st = gram(spec, S, T).values
    value = float(k_ss.mean() + k_tt.mean() - 2.0 * k_st.mean())
    if -_ROUNDING_TOLERANCE <= value < 0.0:
        value = 0.0
    return MmdEstimate(value, BIASED, spec, S.shape[0], T.shape[0])


def mmd_unbiased(spec: KernelSpec, S, T) -> MmdEstimate:
    """Unbiased (U-statistic) MMD^2 estimate; may be negative.

    Within-sample sums exclude i = j and divide by n(n-1), so both sides
    need at least two samples.
    """
    S, T = _validated_pair(S, T, min_each=2)
    spec = resolve(spec, S, T)
    n_s, n_t = S.shape[0], T.shape[0]
    k_ss = gram(spec, S).values
    k_tt = gram(spec, T).values
    k_st = gram(spec, S, T).values
    term_s = (k_ss.sum() - np.trace(k_ss)) / (n_s * (n_s - 1))
    term_t = (k_tt.sum() - np.trace(k_tt)) / (n_t * (n_t - 1))
    value = float(term_s + term_t - 2.0 * k_st.mean())
    return MmdEstimate(value, UNBIASED, spec, n_s, n_t)


def mmd_gradient(spec: KernelSpec, S, T) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of the biased MMD^2 with respect to both samples.

    Uses d/dx k(x, y) = k(x, y) (y - x) / sigma^2 per mixture component.
    A median-heuristic bandwidth is resolved on the pooled sample and then
    treated as a constant (no gradient flows through the median).

    Returns
    -------
    (dS, dT) : arrays shaped like S and T.
    """
    S, T = _validated_pair(S, T, min_each=1)
    spec = resolve(spec, S, T)
    n_s, n_t = S.shape[0], T.shape[0]

    # q_* = sum_m (w_m / sigma_m^2) k_m(., .), the kernel-derivative weights
    q_ss = _derivative_weights(spec, S, S)
    q_tt = _derivative_weights(spec, T, T)
    q_st = _derivative_weights(spec, S, T)

    row_ss = q_ss.sum(axis=1, keepdims=True)
    row_tt = q_tt.sum(axis=1, keepdims=True)
    row_st = q_st.sum(axis=1, keepdims=True)
    col_st = q_st.sum(axis=0)[:, None]

    d_s = (2.0 / n_s**2) * (q_ss @ S - row_ss * S)
    d_s -= (2.0 / (n_s * n_t)) * (q_st @ T - row_st * S)
    d_t = (2.0 / n_t**2) * (q_tt @ T - row_tt * T)
    d_t -= (2.0 / (n_s * n_t)) * (q_st.T @ S - col_st * T)
    return d_s, d_t


def _derivative_weights(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    sq = cdist(A, B, "sqeuclidean")
    out = np.zeros_like(sq)
    for w, s in zip(spec.weights, spec.bandwidths):
        out += (w / (s * s)) * np.exp(sq / (-2.0 * s * s))
    return out


def _block_statistic(k_pool: np.ndarray, idx_s: np.ndarray, idx_t: np.ndarray) -> float:
    k_ss = k_pool[np.ix_(idx_s, idx_s)]
    k_tt = k_pool[np.ix_(idx_t, idx_t)]
    k_st = k_pool[np.ix_(idx_s, idx_t)]
    return float(k_ss.mean() + k_tt.mean() - 2.0 * k_st.mean())


def permutation_test(
    spec: KernelSpec,
    S,
    T,
    n_permutations: int = 200,
    seed: int = 0,
    quantiles: tuple[float, ...] = (0.5, 0.9, 0.95, 0.99),
) -> PermutationTestResult:
    """Two-sample permutation test using the biased MMD^2 as statistic.

    Pools the samples, computes the pooled Gram matrix once (a
    median-heuristic bandwidth is resolved on the pool, which is invariant
    under permutation), then replays ``n_permutations`` seeded random splits
    of sizes (n_s, n_t). Deterministic for a fixed seed.

    Parameters
    ----------
    n_permutations : int
        Number of random splits; at least 99 so the add-one p-value can
        resolve the 0.01 level.
    seed : int
        Seed of the permutation stream.
    quantiles : tuple of float
        Probability levels at which the null distribution is summarized.
    """
    S, T = _validated_pair(S, T, min_each=2)
    n_permutations = as_positive_int(n_permutations, name="n_permutations", minimum=99)
    n_s, n_t = S.shape[0], T.shape[0]
    pooled = np.vstack([S, T])
    spec = resolve(spec, pooled)
    k_pool = gram(spec, pooled).values

    observed = _block_statistic(k_pool, np.arange(n_s), np.arange(n_s, n_s + n_t))
    if -_ROUNDING_TOLERANCE <= observed < 0.0:
        observed = 0.0

    rng = np.random.default_rng(seed)
    null = np.empty(n_permutations)
    for b in range(n_permutations):
        perm = rng.permutation(n_s + n_t)
        null[b] = _block_statistic(k_pool, perm[:n_s], perm[n_s:])

    p_value = (1.0 + int(np.count_nonzero(null >= observed))) / (1.0 + n_permutations)
    q_pairs = tuple((float(q), float(np.quantile(null, q))) for q in quantiles)
    return PermutationTestResult(observed, p_value, n_permutations, q_pairs)
