import math
import os
import sys

ROOT = os.path.dirname(os.path.dirname(__file__))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

import numpy as np
import pytest
from numpy.testing import assert_allclose

from funess.features import kernels, statistics
from funess.features.params import FunessParams
from funess.features.validators import BadIndexError, OutOfRangeError

TAU_GRID = [0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, math.inf]


def build_params(**changes):
    return FunessParams(k=0.75, r=0.5, alpha=2.0, x1=1.0, x2=-1.0, q1=0.6).replace(**changes)


def test_stationary_conditional_moments():
    moments = statistics.stationary_conditional_moments(1, build_params())
    assert moments.mean == pytest.approx(0.5)
    assert moments.variance == pytest.approx(0.75)
    with pytest.raises(BadIndexError):
        statistics.stationary_conditional_moments(3, build_params())


def test_conditional_moments_relax_to_stationary():
    p = build_params()
    early = statistics.conditional_moments(1, 0.0, p)
    assert early.mean == pytest.approx(1.0)
    assert early.variance == pytest.approx(0.0)
    late = statistics.conditional_moments(2, 40.0, p)
    assert late.mean == pytest.approx(0.0, abs=1e-12)
    assert late.variance == pytest.approx(1.0)


def test_stationary_correlation_modes():
    p = build_params()
    assert statistics.stationary_correlation(0.0, p) == pytest.approx(0.85)
    assert statistics.stationary_correlation(0.5, p) == pytest.approx(0.85 * math.exp(-1.0))
    assert statistics.stationary_correlation(0.5, p, "conditional", x0=1) == pytest.approx(0.75 * math.exp(-1.0))
    assert statistics.stationary_correlation(0.5, p, "gamma_substituted", x0=2) == pytest.approx(1.0)
    with pytest.raises(BadIndexError):
        statistics.stationary_correlation(0.5, p, "conditional")
    with pytest.raises(OutOfRangeError):
        statistics.stationary_correlation(-0.1, p)


def test_stationary_correlation_degenerate_values():
    assert statistics.stationary_correlation(0.3, build_params(x1=2.0, x2=2.0)) == 0.0


def test_three_point_joint_marginals():
    p = build_params()
    joint = statistics.three_point_joint(1.0, 0.0, p, stationary=True)
    assert joint.p.sum() == pytest.approx(1.0)
    assert_allclose(joint.two_point(), [[0.45, 0.15], [0.2, 0.2]], atol=1e-12)
    assert_allclose(joint.transition(), kernels.intermediate_lambda(1.0, 0.0, p, stationary=True).entries, atol=1e-12)


def test_three_point_joint_finite_matches_compact_form():
    p = build_params()
    brute = statistics.three_point_joint(1.0, 0.5, p).transition()
    assert_allclose(brute, kernels.intermediate_lambda(1.0, 0.5, p).entries, atol=1e-12)


def test_cmi_reference_values():
    p = build_params()
    assert statistics.conditional_mutual_information(0.0, p).cmi == pytest.approx(0.0, abs=1e-15)
    assert statistics.conditional_mutual_information(1.0, p).cmi == pytest.approx(0.02347, abs=1e-4)
    assert statistics.conditional_mutual_information(math.inf, p).cmi == pytest.approx(0.03063, abs=1e-4)


@pytest.mark.parametrize("tau", TAU_GRID)
def test_cmi_closed_form_matches_brute_force(tau):
    p = build_params()
    closed = statistics.conditional_mutual_information(tau, p)
    brute = statistics.conditional_mutual_information(tau, p, method="brute_force")
    assert abs(closed.cmi - brute.cmi) <= 1e-10
    assert abs(closed.h_lambda - brute.h_lambda) <= 1e-10
    assert_allclose(closed.h_kernels, brute.h_kernels, atol=1e-10)


@pytest.mark.parametrize("k", [0.2, 0.5, 0.8])
def test_cmi_vanishes_for_markov(k):
    p = build_params(k=k, r=1.0 - k)
    for tau in TAU_GRID:
        assert abs(statistics.conditional_mutual_information(tau, p).cmi) <= 1e-12


@pytest.mark.parametrize(
    "changes",
    [
        {"k": 1.0, "r": 0.0, "q1": 0.6},
        {"k": 0.5, "r": 1.0, "q1": 0.0},
        {"k": 1.0, "r": 0.5, "q1": 1.0},
    ],
)
def test_cmi_with_empty_stationary_state(changes):
    # one component of p_st is zero at each of these points
    p = build_params(**changes)
    assert np.min(kernels.stationary_distribution(p)) == 0.0
    for tau in TAU_GRID:
        closed = statistics.conditional_mutual_information(tau, p)
        brute = statistics.conditional_mutual_information(tau, p, method="brute_force")
        assert abs(closed.cmi) <= 1e-12
        assert abs(closed.cmi - brute.cmi) <= 1e-12
        assert statistics.entropy_difference(tau, p) == pytest.approx(-closed.cmi, abs=1e-12)


def test_stationary_pair_joint_marginals():
    p = build_params()
    pair = statistics.stationary_pair_joint(1.0, p)
    assert pair.sum() == pytest.approx(1.0)
    assert_allclose(pair.sum(axis=0), kernels.stationary_distribution(p), atol=1e-15)
    compact = kernels.intermediate_lambda(1.0, 0.0, p, stationary=True).entries
    assert_allclose(pair / pair.sum(axis=0), compact, atol=1e-12)


def test_mutual_information_finite_approaches_stationary():
    p = build_params()
    late = statistics.mutual_information_finite(41.0, 40.0, p)
    assert late.cmi == pytest.approx(statistics.conditional_mutual_information(1.0, p).cmi, abs=1e-12)
    assert statistics.mutual_information_finite(0.5, 0.0, p).cmi == pytest.approx(0.0, abs=1e-15)


def test_entropy_difference_sign_and_magnitude():
    p = build_params()
    for tau in TAU_GRID:
        value = statistics.entropy_difference(tau, p)
        assert value <= 1e-15
        assert abs(value) == pytest.approx(statistics.conditional_mutual_information(tau, p).cmi, abs=1e-10)


def test_entropy_functional_chain_rule():
    p = build_params()
    terms = statistics.entropy_functional_terms(1.0, p)
    assert terms.combined == pytest.approx(terms.i_t0_given_s, abs=1e-12)
    assert terms.h_t_given_s - terms.h_t_given_s0 == pytest.approx(terms.i_t0_given_s, abs=1e-12)
    assert terms.i_t0_given_s == pytest.approx(statistics.conditional_mutual_information(1.0, p).cmi, abs=1e-10)


def test_entropy_helpers():
    assert statistics.entropy(np.array([0.5, 0.5])) == pytest.approx(math.log(2.0))
    assert statistics.entropy(np.array([1.0, 0.0])) == 0.0
    independent = np.einsum("i,j,k->ijk", [0.3, 0.7], [0.4, 0.6], [0.5, 0.5])
    assert statistics.cmi_from_joint(independent) == pytest.approx(0.0, abs=1e-12)
