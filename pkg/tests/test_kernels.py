import math
import os
import sys

ROOT = os.path.dirname(os.path.dirname(__file__))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

import numpy as np
import pytest
from numpy.testing import assert_allclose

from funess.features import kernels
from funess.features.matrix import ColumnStochasticMatrix
from funess.features.params import FunessParams, validate_params
from funess.features.validators import (
    BadIndexError,
    MemoryRegimeError,
    OutOfRangeError,
    StepTooLargeError,
    StochasticityError,
    TimeOrderError,
    ZeroMarginalError,
)


def build_params(**changes):
    return FunessParams(k=0.75, r=0.5, alpha=2.0, x1=1.0, x2=-1.0, q1=0.6).replace(**changes)


def test_memory_kernel_values():
    p = build_params()
    assert_allclose(kernels.memory_kernel(1, 1.0, p).entries, [[0.783834, 0.648499], [0.216166, 0.351501]], atol=1e-6)
    assert_allclose(kernels.memory_kernel(2, 1.0, p).entries, [[0.567668, 0.432332], [0.432332, 0.567668]], atol=1e-6)


def test_memory_kernel_limits():
    p = build_params()
    assert_allclose(kernels.memory_kernel(1, 0.0, p).entries, np.eye(2))
    late = kernels.memory_kernel(2, math.inf, p).entries
    assert_allclose(late, [[0.5, 0.5], [0.5, 0.5]])


def test_memory_kernel_rejects_bad_input():
    p = build_params()
    with pytest.raises(BadIndexError):
        kernels.memory_kernel(3, 1.0, p)
    with pytest.raises(BadIndexError):
        kernels.memory_kernel(0, 1.0, p)
    with pytest.raises(TimeOrderError):
        kernels.memory_kernel(1, -0.1, p)


def test_lambda_initial_and_determinant():
    p = build_params()
    lam = kernels.lambda_initial(1.0, p)
    assert_allclose(lam.entries, [[0.783834, 0.432332], [0.216166, 0.567668]], atol=1e-6)
    assert kernels.determinant(1.0, p) == pytest.approx(0.351501, abs=1e-6)
    assert kernels.determinant(1.0, p) == pytest.approx(np.linalg.det(lam.entries), abs=1e-12)


def test_lambda_stationary_and_distribution():
    p = build_params()
    assert_allclose(kernels.lambda_stationary(p).entries, [[0.75, 0.5], [0.25, 0.5]])
    assert_allclose(kernels.stationary_distribution(p), [0.65, 0.35])
    assert kernels.marginal_x1(1e6, p) == pytest.approx(0.65)


def test_gamma_divisor_values_and_reconstruction():
    p = build_params()
    gamma = kernels.gamma_divisor(1.0, 0.5, p)
    assert gamma[0, 0] == pytest.approx(0.889456, abs=1e-6)
    assert gamma[1, 1] == pytest.approx(0.778912, abs=1e-6)
    rebuilt = gamma @ kernels.lambda_initial(0.5, p)
    assert rebuilt.max_abs_diff(kernels.lambda_initial(1.0, p)) <= 1e-12


def test_gamma_divisor_is_identity_at_equal_times():
    p = build_params()
    assert_allclose(kernels.gamma_divisor(0.7, 0.7, p).entries, np.eye(2), atol=1e-15)


def test_bayes_weights_stationary():
    p = build_params()
    weights = kernels.bayes_weights(1, kernels.STATIONARY, p)
    assert_allclose(weights.a, [0.692308, 0.428571], atol=1e-6)
    other = kernels.bayes_weights(2, kernels.STATIONARY, p)
    assert_allclose(weights.a + other.a, [1.0, 1.0])
    assert_allclose(weights.as_matrix() + other.as_matrix(), np.eye(2))


def test_bayes_weights_zero_marginal():
    # q1 = 1 with k = 1 never visits x2
    p = build_params(k=1.0, q1=1.0)
    with pytest.raises(ZeroMarginalError):
        kernels.bayes_weights(1, 0.5, p)


def test_intermediate_lambda_depends_on_initial_law():
    p = build_params()
    lam = kernels.intermediate_lambda(1.0, 0.5, p)
    assert_allclose(lam.entries, [[0.810338, 0.356734], [0.189662, 0.643266]], atol=1e-5)
    gap = (lam @ kernels.lambda_initial(0.5, p)).max_abs_diff(kernels.lambda_initial(1.0, p))
    assert gap > 0.04
    other = kernels.intermediate_lambda(1.0, 0.5, p.replace(q1=0.2))
    assert other.max_abs_diff(lam) > 1e-3


def test_intermediate_lambda_markov_is_divisible():
    p = build_params(r=0.25)
    lam = kernels.intermediate_lambda(1.0, 0.5, p)
    assert lam.max_abs_diff(kernels.memory_kernel(1, 0.5, p)) <= 1e-12
    assert lam.max_abs_diff(kernels.gamma_divisor(1.0, 0.5, p)) <= 1e-12


def test_intermediate_lambda_time_order():
    p = build_params()
    with pytest.raises(TimeOrderError):
        kernels.intermediate_lambda(0.4, 0.5, p)


def test_rate_factor_and_generator():
    p = build_params()
    assert kernels.rate_factor(1.0, p) == pytest.approx(0.770041, abs=1e-5)
    assert kernels.rate_factor(50.0, p) < 1e-30
    assert kernels.rate_factor(3.0, build_params(r=0.25)) == 2.0
    snapshot = kernels.generator(1.0, p)
    assert snapshot.is_conservative()
    assert snapshot.W12 == pytest.approx(0.5 * snapshot.w)
    assert snapshot.W21 == pytest.approx(0.25 * snapshot.w)


def test_propagate_master_matches_closed_form():
    p = build_params()
    numeric = kernels.propagate_master(p.q, 1.0, 1e-3, p)
    assert_allclose(numeric, [0.643233, 0.356767], atol=1e-6)
    assert_allclose(numeric, kernels.lambda_initial(1.0, p) @ p.q, atol=1e-8)


def test_propagate_master_rejects_large_step():
    p = build_params()
    with pytest.raises(StepTooLargeError):
        kernels.propagate_master(p.q, 1.0, 0.06, p)
    assert_allclose(kernels.propagate_master(p.q, 0.0, 0.01, p), p.q)


def test_column_stochastic_matrix_validation():
    assert_allclose(ColumnStochasticMatrix(np.array([[1.0, -1e-15], [0.0, 1.0 + 1e-15]])).entries[0, 1], 0.0)
    with pytest.raises(StochasticityError):
        ColumnStochasticMatrix(np.array([[0.5, 0.5], [0.4, 0.5]]))
    with pytest.raises(StochasticityError):
        ColumnStochasticMatrix(np.array([[1.1, 0.0], [-0.1, 1.0]]))


def test_params_validation():
    with pytest.raises(MemoryRegimeError):
        validate_params({"k": 0.2, "r": 0.3, "alpha": 1.0})
    with pytest.raises(OutOfRangeError):
        validate_params({"k": 1.2, "r": 0.5, "alpha": 1.0})
    with pytest.raises(OutOfRangeError):
        validate_params({"k": 0.7, "r": 0.5, "alpha": 0.0})
    with pytest.raises(ValueError):
        validate_params({"k": 0.7, "r": 0.5, "alpha": 1.0, "q": 0.3})
    p = validate_params({"k": 0.5, "r": 0.5, "alpha": 1.0})
    assert p.markov_flag
    assert not build_params().markov_flag


def test_degenerate_values_warn(caplog):
    with caplog.at_level("WARNING"):
        p = validate_params({"k": 0.7, "r": 0.5, "alpha": 1.0, "x1": 2.0, "x2": 2.0})
    assert p.degenerate
    assert "degenerate-statistics" in caplog.text
