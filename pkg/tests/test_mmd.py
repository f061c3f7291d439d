"""MMD estimators, their gradients, and the permutation test."""

import math

import numpy as np
import pytest

from mmdadapt import (
    InputError,
    KernelSpec,
    mmd_biased,
    mmd_gradient,
    mmd_unbiased,
    permutation_test,
    resolve,
)

from _oracles import (
    central_difference,
    max_relative_error,
    naive_mmd_biased,
    naive_mmd_unbiased,
)

GAUSS1 = KernelSpec.gaussian(1.0)


class TestBiasedEstimator:
    def test_identical_samples_are_zero(self):
        rng = np.random.default_rng(0)
        S = rng.normal(size=(8, 3))
        est = mmd_biased(GAUSS1, S, S.copy())
        assert est.value == pytest.approx(0.0, abs=1e-12)
        assert est.value >= 0.0

    def test_single_point_hand_value(self):
        est = mmd_biased(GAUSS1, [[0.0]], [[2.0]])
        assert est.value == pytest.approx(2.0 - 2.0 * math.exp(-2.0), abs=1e-12)
        assert est.estimator == "biased"
        assert (est.n_source, est.n_target) == (1, 1)

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(1)
        S = rng.normal(size=(7, 3))
        T = rng.normal(size=(5, 3))
        expected = naive_mmd_biased((1.0,), (1.0,), S, T)
        assert mmd_biased(GAUSS1, S, T).value == pytest.approx(expected, abs=1e-12)

    def test_mixture_matches_oracle(self):
        rng = np.random.default_rng(2)
        S = rng.normal(size=(6, 2))
        T = rng.normal(size=(8, 2))
        spec = KernelSpec.mixture((0.5, 1.0, 2.0))
        expected = naive_mmd_biased(spec.bandwidths, spec.weights, S, T)
        assert mmd_biased(spec, S, T).value == pytest.approx(expected, abs=1e-12)

    def test_median_spec_matches_oracle_after_resolution(self):
        rng = np.random.default_rng(3)
        S = rng.normal(size=(5, 2))
        T = rng.normal(size=(6, 2))
        resolved = resolve(KernelSpec.median_mixture(), S, T)
        est = mmd_biased(KernelSpec.median_mixture(), S, T)
        assert est.kernel == resolved  # snapshot records concrete bandwidths
        expected = naive_mmd_biased(resolved.bandwidths, resolved.weights, S, T)
        assert est.value == pytest.approx(expected, abs=1e-12)

    def test_nonnegative_on_random_inputs(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            S = rng.normal(size=(rng.integers(1, 10), 2))
            T = rng.normal(size=(rng.integers(1, 10), 2))
            assert mmd_biased(GAUSS1, S, T).value >= 0.0

    def test_symmetry_in_arguments(self):
        rng = np.random.default_rng(5)
        S = rng.normal(size=(6, 3))
        T = rng.normal(size=(9, 3))
        a = mmd_biased(GAUSS1, S, T).value
        b = mmd_biased(GAUSS1, T, S).value
        assert a == pytest.approx(b, abs=1e-12)

    def test_row_shuffle_invariance(self):
        rng = np.random.default_rng(6)
        S = rng.normal(size=(7, 2))
        T = rng.normal(size=(5, 2))
        base = mmd_biased(GAUSS1, S, T).value
        shuffled = mmd_biased(GAUSS1, S[rng.permutation(7)], T[rng.permutation(5)]).value
        assert shuffled == pytest.approx(base, abs=1e-12)

    def test_empty_input_rejected(self):
        with pytest.raises(InputError):
            mmd_biased(GAUSS1, np.empty((0, 1)), [[1.0]])

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InputError):
            mmd_biased(GAUSS1, [[0.0]], [[0.0, 1.0]])


class TestUnbiasedEstimator:
    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(7)
        S = rng.normal(size=(6, 3))
        T = rng.normal(size=(9, 3))
        expected = naive_mmd_unbiased((1.0,), (1.0,), S, T)
        assert mmd_unbiased(GAUSS1, S, T).value == pytest.approx(expected, abs=1e-12)

    def test_identical_samples_go_negative(self):
        rng = np.random.default_rng(8)
        S = rng.normal(size=(10, 2))
        est = mmd_unbiased(GAUSS1, S, S.copy())
        assert est.value < 0.0
        expected = naive_mmd_unbiased((1.0,), (1.0,), S, S)
        assert est.value == pytest.approx(expected, abs=1e-12)

    def test_single_point_rejected(self):
        with pytest.raises(InputError):
            mmd_unbiased(GAUSS1, [[0.0]], [[1.0], [2.0]])

    def test_lower_bound_is_twice_max_kernel_value(self):
        # the three-term form cannot drop below -2 for kernels bounded by 1
        rng = np.random.default_rng(22)
        for _ in range(50):
            S = rng.normal(size=(rng.integers(2, 8), 2))
            T = rng.normal(size=(rng.integers(2, 8), 2))
            assert mmd_unbiased(GAUSS1, S, T).value >= -2.0

    @pytest.mark.slow
    def test_unbiasedness_monte_carlo(self):
        # same distribution both sides: mean estimate within 3 SE of zero
        rng = np.random.default_rng(9)
        estimates = np.empty(2000)
        for i in range(2000):
            S = rng.normal(size=(20, 2))
            T = rng.normal(size=(20, 2))
            estimates[i] = mmd_unbiased(GAUSS1, S, T).value
        se = estimates.std(ddof=1) / math.sqrt(len(estimates))
        assert abs(estimates.mean()) < 3.0 * se


class TestGradient:
    def test_single_point_hand_value(self):
        # d/dx [2 - 2 exp(-(x-u)^2/2)] at x=0, u=2 is -4 e^-2
        d_s, d_t = mmd_gradient(GAUSS1, [[0.0]], [[2.0]])
        assert d_s[0, 0] == pytest.approx(-4.0 * math.exp(-2.0), rel=1e-12)
        assert d_t[0, 0] == pytest.approx(4.0 * math.exp(-2.0), rel=1e-12)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(10)
        S = rng.normal(size=(4, 2))
        T = rng.normal(size=(3, 2))
        d_s, d_t = mmd_gradient(GAUSS1, S, T)
        num_s = central_difference(lambda X: mmd_biased(GAUSS1, X, T).value, S)
        num_t = central_difference(lambda X: mmd_biased(GAUSS1, S, X).value, T)
        assert max_relative_error(d_s, num_s) < 1e-5
        assert max_relative_error(d_t, num_t) < 1e-5

    def test_mixture_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        spec = KernelSpec.mixture((0.5, 1.5))
        S = rng.normal(size=(5, 3))
        T = rng.normal(size=(4, 3))
        d_s, d_t = mmd_gradient(spec, S, T)
        num_s = central_difference(lambda X: mmd_biased(spec, X, T).value, S)
        num_t = central_difference(lambda X: mmd_biased(spec, S, X).value, T)
        assert max_relative_error(d_s, num_s) < 1e-5
        assert max_relative_error(d_t, num_t) < 1e-5

    def test_identical_sets_move_together_freely(self):
        # perturbing S and T identically keeps the loss at its minimum
        rng = np.random.default_rng(12)
        S = rng.normal(size=(6, 2))
        d_s, d_t = mmd_gradient(GAUSS1, S, S.copy())
        direction = rng.normal(size=(6, 2))
        directional = np.sum(d_s * direction) + np.sum(d_t * direction)
        assert abs(directional) < 1e-10

    def test_median_bandwidth_is_constant_in_gradient(self):
        # the analytic gradient must differentiate the resolved fixed
        # kernel, not the data-dependent bandwidth
        rng = np.random.default_rng(13)
        S = rng.normal(size=(4, 2))
        T = rng.normal(size=(5, 2))
        spec = KernelSpec.median_gaussian()
        resolved = resolve(spec, S, T)
        d_s, _ = mmd_gradient(spec, S, T)
        fixed_s, _ = mmd_gradient(resolved, S, T)
        np.testing.assert_array_equal(d_s, fixed_s)


class TestShiftSensitivity:
    @pytest.mark.slow
    def test_monotone_in_mean_shift(self):
        rng = np.random.default_rng(14)
        shifts = (0.0, 1.0, 2.0, 4.0)
        means = []
        for shift in shifts:
            values = []
            for _ in range(20):
                S = rng.normal(size=(200, 2))
                T = rng.normal(size=(200, 2)) + shift
                values.append(mmd_biased(GAUSS1, S, T).value)
            means.append(np.mean(values))
        assert all(a <= b + 1e-12 for a, b in zip(means, means[1:]))


class TestPermutationTest:
    def test_deterministic_for_fixed_seed(self):
        rng = np.random.default_rng(15)
        S = rng.normal(size=(12, 2))
        T = rng.normal(size=(10, 2))
        a = permutation_test(GAUSS1, S, T, n_permutations=120, seed=3)
        b = permutation_test(GAUSS1, S, T, n_permutations=120, seed=3)
        assert a == b

    def test_statistic_equals_biased_estimate(self):
        rng = np.random.default_rng(16)
        S = rng.normal(size=(9, 2))
        T = rng.normal(size=(7, 2))
        result = permutation_test(GAUSS1, S, T, n_permutations=99, seed=0)
        assert result.statistic == pytest.approx(mmd_biased(GAUSS1, S, T).value, abs=1e-12)

    def test_add_one_p_value_formula(self):
        rng = np.random.default_rng(17)
        S = rng.normal(size=(8, 1))
        T = rng.normal(size=(8, 1))
        result = permutation_test(GAUSS1, S, T, n_permutations=99, seed=1)
        assert 0.0 < result.p_value <= 1.0
        # p is k/(1+B) for integer k >= 1
        k = result.p_value * 100.0
        assert k == pytest.approx(round(k), abs=1e-9)
        assert round(k) >= 1

    def test_detects_strong_shift(self):
        rng = np.random.default_rng(18)
        S = rng.normal(size=(30, 1))
        T = rng.normal(size=(30, 1)) + 3.0
        result = permutation_test(GAUSS1, S, T, n_permutations=199, seed=0)
        assert result.p_value <= 0.01

    def test_accepts_matched_distributions(self):
        rng = np.random.default_rng(19)
        S = rng.normal(size=(30, 1))
        T = rng.normal(size=(30, 1))
        result = permutation_test(GAUSS1, S, T, n_permutations=199, seed=0)
        assert result.p_value > 0.05

    def test_quantiles_are_ordered(self):
        rng = np.random.default_rng(20)
        S = rng.normal(size=(15, 2))
        T = rng.normal(size=(15, 2))
        result = permutation_test(GAUSS1, S, T, n_permutations=99, seed=0)
        values = [v for _, v in result.null_quantiles]
        assert values == sorted(values)

    def test_too_few_permutations_rejected(self):
        with pytest.raises(InputError):
            permutation_test(GAUSS1, np.ones((3, 1)), np.zeros((3, 1)), n_permutations=50)

    def test_median_heuristic_kernel_supported(self):
        rng = np.random.default_rng(21)
        S = rng.normal(size=(10, 2))
        T = rng.normal(size=(10, 2)) + 2.0
        result = permutation_test(KernelSpec.median_mixture(), S, T, n_permutations=99, seed=0)
        assert result.p_value <= 0.05
