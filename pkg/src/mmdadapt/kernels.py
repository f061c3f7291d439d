"""Gaussian kernels, Gram matrices and bandwidth selection.

The kernel of a single component with bandwidth sigma is

    k(x, y) = exp(-||x - y||^2 / (2 * sigma^2))

and a mixture is a convex combination of such components. Note the factor
2 in the exponent denominator; some codebases use 1/sigma^2 instead, which
silently halves every effective bandwidth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .exceptions import DegenerateDataError, InputError
from .validation import as_features, check_same_dim

GAUSSIAN = "gaussian"
GAUSSIAN_MIXTURE = "gaussian-mixture"
FIXED = "fixed"
MEDIAN_HEURISTIC = "median-heuristic"

#: Bandwidth multipliers of the default mixture: a geometric grid 2^k,
#: k in -2..2, centered on the reference bandwidth.
DEFAULT_MIXTURE_MULTIPLIERS = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus bandwidth parameters.

    With ``bandwidth_mode="fixed"`` the ``bandwidths`` are absolute sigmas.
    With ``bandwidth_mode="median-heuristic"`` they are multipliers applied
    to the median-heuristic sigma of whatever data the kernel is evaluated
    on; call :func:`resolve` (or let ``gram``/the MMD estimators do it) to
    obtain the concrete fixed-bandwidth spec for a given sample.
    """

    family: str = GAUSSIAN
    bandwidths: tuple[float, ...] = (1.0,)
    weights: tuple[float, ...] = (1.0,)
    bandwidth_mode: str = FIXED

    def __post_init__(self):
        if self.family not in (GAUSSIAN, GAUSSIAN_MIXTURE):
            raise InputError(f"unknown kernel family {self.family!r}")
        if self.bandwidth_mode not in (FIXED, MEDIAN_HEURISTIC):
            raise InputError(f"unknown bandwidth_mode {self.bandwidth_mode!r}")
        bw = tuple(float(b) for b in self.bandwidths)
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "bandwidths", bw)
        object.__setattr__(self, "weights", w)
        if not bw:
            raise InputError("at least one bandwidth is required")
        if any(not math.isfinite(b) or b <= 0 for b in bw):
            raise InputError("every bandwidth must be finite and > 0")
        if len(w) != len(bw):
            raise InputError(f"{len(w)} weights for {len(bw)} bandwidths")
        if any(x < 0 for x in w):
            raise InputError("mixture weights must be nonnegative")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise InputError(f"mixture weights must sum to 1, got {math.fsum(w)!r}")
        if self.family == GAUSSIAN and len(bw) != 1:
            raise InputError("family 'gaussian' takes exactly one bandwidth")

    @classmethod
    def gaussian(cls, sigma: float = 1.0) -> "KernelSpec":
        """Single Gaussian kernel with a fixed bandwidth."""
        return cls(GAUSSIAN, (float(sigma),), (1.0,), FIXED)

    @classmethod
    def median_gaussian(cls) -> "KernelSpec":
        """Single Gaussian kernel; sigma set per sample by the median heuristic."""
        return cls(GAUSSIAN, (1.0,), (1.0,), MEDIAN_HEURISTIC)

    @classmethod
    def mixture(cls, bandwidths, weights=None) -> "KernelSpec":
        """Fixed equal-weight (or explicitly weighted) Gaussian mixture."""
        bw = tuple(float(b) for b in bandwidths)
        if weights is None:
            weights = (1.0 / len(bw),) * len(bw)
        return cls(GAUSSIAN_MIXTURE, bw, tuple(weights), FIXED)

    @classmethod
    def median_mixture(cls, multipliers=DEFAULT_MIXTURE_MULTIPLIERS) -> "KernelSpec":
        """Equal-weight mixture on a geometric bandwidth grid around the
        median-heuristic sigma of the evaluated data."""
        mult = tuple(float(m) for m in multipliers)
        w = (1.0 / len(mult),) * len(mult)
        return cls(GAUSSIAN_MIXTURE, mult, w, MEDIAN_HEURISTIC)

    def is_resolved(self) -> bool:
        return self.bandwidth_mode == FIXED


@dataclass(frozen=True)
class KernelMatrix:
    """A matrix of pairwise kernel evaluations.

    ``symmetric`` is True when both input sets were the same sample; the
    values are then mirrored exactly and the diagonal is exactly 1.
    """

    values: np.ndarray = field(repr=False)
    symmetric: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def median_heuristic(A, B=None) -> float:
    """Median-heuristic bandwidth of the pooled sample.

    Returns sqrt(median(d^2) / 2) where d^2 ranges over the squared
    Euclidean distances of all unordered point pairs (self-pairs excluded),
    so the single-kernel exponent equals -1 at the median distance. The
    median of an even count is the mean of the two middle values.

    Raises
    ------
    DegenerateDataError
        If the median pairwise distance is zero (sigma would be 0).
    InputError
        If the pooled sample has fewer than two points.
    """
    A = as_features(A, name="A")
    if B is None:
        pooled = A
    else:
        B = as_features(B, name="B", allow_empty=True)
        check_same_dim(A, B)
        pooled = np.vstack([A, B])
    if pooled.shape[0] < 2:
        raise InputError("median heuristic needs at least two pooled points")
    sq = pdist(pooled, "sqeuclidean")
    med = float(np.median(sq))
    if med <= 0.0:
        raise DegenerateDataError(
            "median pairwise distance is zero; bandwidth would degenerate to 0"
        )
    return math.sqrt(med / 2.0)


def resolve(spec: KernelSpec, A, B=None) -> KernelSpec:
    """Turn a median-heuristic spec into a fixed one for the given sample.

    Fixed specs pass through unchanged. The returned spec scales each
    bandwidth multiplier by the median-heuristic sigma of A (pooled with B
    when given).
    """
    if spec.is_resolved():
        return spec
    sigma = median_heuristic(A, B)
    return KernelSpec(
        family=spec.family,
        bandwidths=tuple(m * sigma for m in spec.bandwidths),
        weights=spec.weights,
        bandwidth_mode=FIXED,
    )


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Evaluate k(x, y) for a single pair of vectors.

    Returns sum_m w_m * exp(-||x - y||^2 / (2 * sigma_m^2)), a value in
    (0, 1]. Symmetric in x and y by construction (the squared distance is
    the same floating-point expression either way). A median-heuristic spec
    is resolved on the two-point pool {x, y}.
    """
    xv = as_features(x, name="x")
    yv = as_features(y, name="y")
    if xv.shape != (1, xv.shape[1]) or yv.shape != (1, yv.shape[1]):
        raise InputError("eval_kernel takes single vectors; use gram for matrices")
    check_same_dim(xv, yv, names=("x", "y"))
    spec = resolve(spec, xv, yv)
    sq = float(np.sum((xv[0] - yv[0]) ** 2))
    return _mix_scalar(spec, sq)


def _mix_scalar(spec: KernelSpec, sq: float) -> float:
    acc = 0.0
    for w, s in zip(spec.weights, spec.bandwidths):
        acc += w * math.exp(-sq / (2.0 * s * s))
    return acc


def _mix_matrix(spec: KernelSpec, sq: np.ndarray) -> np.ndarray:
    out = np.zeros_like(sq)
    for w, s in zip(spec.weights, spec.bandwidths):
        out += w * np.exp(sq / (-2.0 * s * s))
    return out


def gram(spec: KernelSpec, A, B=None) -> KernelMatrix:
    """Kernel (Gram) matrix between two sample sets.

    ``B=None`` computes the symmetric Gram matrix of A: only one triangle of
    squared distances is computed and mirrored, so values[i, j] == values[j, i]
    bitwise and the diagonal is exactly 1. Empty inputs yield 0 x m / n x 0
    matrices. A median-heuristic spec is resolved on the pooled input.
    """
    A = as_features(A, name="A", allow_empty=True)
    symmetric = B is None
    if symmetric:
        spec = resolve(spec, A) if not spec.is_resolved() else spec
        n = A.shape[0]
        if n == 0:
            return KernelMatrix(np.zeros((0, 0)), symmetric=True)
        if n == 1:
            return KernelMatrix(np.ones((1, 1)), symmetric=True)
        sq = squareform(pdist(A, "sqeuclidean"))
        values = _mix_matrix(spec, sq)
        np.fill_diagonal(values, 1.0)  # k(x, x) = sum of weights = 1
        return KernelMatrix(values, symmetric=True)
    B = as_features(B, name="B", allow_empty=True)
    check_same_dim(A, B)
    spec = resolve(spec, np.vstack([A, B])) if not spec.is_resolved() else spec
    if A.shape[0] == 0 or B.shape[0] == 0:
        return KernelMatrix(np.zeros((A.shape[0], B.shape[0])), symmetric=False)
    sq = cdist(A, B, "sqeuclidean")
    return KernelMatrix(_mix_matrix(spec, sq), symmetric=False)
