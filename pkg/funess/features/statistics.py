"""Exact stationary statistics: conditional moments, correlations, entropies and CMI.

Information quantities are in nats with the 0 ln 0 = 0 convention. Entropy
terms are summed in ascending order with ``math.fsum``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np
from scipy.special import entr

from funess.features import kernels
from funess.features.params import FunessParams
from funess.features.validators import BadIndexError, OutOfRangeError, ensure_ordered, ensure_state

CorrelationMode = Literal["conditional", "averaged", "gamma_substituted"]
MiMethod = Literal["closed_form", "brute_force"]


@dataclass(frozen=True)
class ConditionalMoments:
    mean: float
    variance: float
    conditioning_state: int


@dataclass(frozen=True, eq=False)
class ThreePointJoint:
    """p[l, k, j] = P(X_t0 = x_l, X_s = x_k, X_t = x_j)."""

    p: np.ndarray
    tau: float
    stationary: bool

    def two_point(self) -> np.ndarray:
        """Joint of (X_t0, X_s), indexed [l, k]."""
        return self.p.sum(axis=2)

    def transition(self) -> np.ndarray:
        """Brute-force p(x_j, t | x_k, s) as a column-stochastic array [j, k]."""
        pair = self.p.sum(axis=0)  # [k, j]
        return (pair / pair.sum(axis=1, keepdims=True)).T


@dataclass(frozen=True)
class MiReport:
    tau: float
    cmi: float
    h_lambda: float
    h_kernels: Tuple[float, float]
    method: str = "closed_form"


@dataclass(frozen=True)
class ChainRuleTerms:
    """Conditional entropies and mutual informations of the chain-rule reduction."""

    i_ts_given_0: float
    i_t0: float
    i_ts: float
    i_t0_given_s: float
    h_t_given_s: float
    h_t_given_s0: float

    @property
    def combined(self) -> float:
        return self.i_ts_given_0 + self.i_t0 - self.i_ts


def entropy(probs: np.ndarray) -> float:
    """Shannon entropy in nats of a (flattened) probability array."""
    return math.fsum(np.sort(entr(np.ravel(np.asarray(probs, dtype=float)))))


def mixed_entropy(matrix: np.ndarray, weights: np.ndarray) -> float:
    """H(Lambda | r) = -sum_{j,k} r_k Lambda_jk ln Lambda_jk."""
    terms = np.asarray(weights, dtype=float)[np.newaxis, :] * entr(np.asarray(matrix, dtype=float))
    return math.fsum(np.sort(terms.ravel()))


def cmi_from_joint(joint: np.ndarray) -> float:
    """I(X_t; X_t0 | X_s) from a joint indexed [t0, s, t]."""
    h_ts = entropy(joint.sum(axis=0))
    h_s = entropy(joint.sum(axis=(0, 2)))
    h_0s = entropy(joint.sum(axis=2))
    h_0st = entropy(joint)
    return (h_ts - h_s) + (h_0s - h_0st)


def stationary_conditional_moments(x0: int, p: FunessParams) -> ConditionalMoments:
    """Stationary mean and variance of X_t given X_t0 = x_{x0}."""
    x0 = ensure_state(x0)
    a, b = kernels.stationary_column(x0, p)
    mean = a * p.x1 + b * p.x2
    variance = (p.x1 - p.x2) ** 2 * a * b
    return ConditionalMoments(mean=float(mean), variance=float(variance), conditioning_state=x0)


def conditional_moments(x0: int, t: float, p: FunessParams) -> ConditionalMoments:
    """Moments of X_t given X_t0 = x_{x0} at a finite time t >= t0."""
    x0 = ensure_state(x0)
    ensure_ordered([("t0", p.t0), ("t", t)])
    a, b = kernels.lambda_initial(t - p.t0, p).column(x0)
    mean = a * p.x1 + b * p.x2
    variance = (p.x1 - p.x2) ** 2 * a * b
    return ConditionalMoments(mean=float(mean), variance=float(variance), conditioning_state=x0)


def stationary_correlation(
    tau: float,
    p: FunessParams,
    mode: CorrelationMode = "averaged",
    x0: Optional[int] = None,
) -> float:
    """Stationary two-time correlation C = <X_t X_s | x0> - <X_t | x0>^2 at lag ``tau``.

    ``gamma_substituted`` evaluates the same expression with Gamma(t|s) in place of
    the memory kernel; Gamma tends to the identity in the stationary limit, so the
    result is the lag-independent conditional variance.
    """

    if tau < 0:
        raise OutOfRangeError(f"out_of_range:tau={tau}:>=0")
    spread = (p.x1 - p.x2) ** 2
    amplitudes = (spread * p.k * (1.0 - p.k), spread * p.r * (1.0 - p.r))
    decay = math.exp(-p.alpha * tau)
    if mode == "averaged":
        return (amplitudes[0] * p.q1 + amplitudes[1] * p.q2) * decay
    if x0 is None:
        raise BadIndexError(f"bad_index:x0=None:mode={mode}")
    amplitude = amplitudes[ensure_state(x0) - 1]
    if mode == "conditional":
        return amplitude * decay
    if mode == "gamma_substituted":
        return amplitude
    raise OutOfRangeError(f"out_of_range:mode={mode}")


def three_point_joint(t: float, s: float, p: FunessParams, stationary: bool = False) -> ThreePointJoint:
    """p[l, k, j] = Q^(l)(t|s)_jk Lambda(s|t0)_kl q_l (Lambda_st in stationary mode)."""

    if stationary:
        ensure_ordered([("s", s), ("t", t)])
        lam = kernels.lambda_stationary(p).entries
    else:
        ensure_ordered([("t0", p.t0), ("s", s), ("t", t)])
        lam = kernels.lambda_initial(s - p.t0, p).entries
    joint = np.empty((2, 2, 2))
    for l in (1, 2):
        q_kernel = kernels.memory_kernel(l, t - s, p).entries
        joint[l - 1] = (q_kernel * lam[:, l - 1][np.newaxis, :]).T * p.q[l - 1]
    return ThreePointJoint(p=joint, tau=t - s, stationary=stationary)


def stationary_pair_joint(tau: float, p: FunessParams) -> np.ndarray:
    """Stationary joint of (X_t, X_s) at lag ``tau``, indexed [j, k] like Lambda_st(t|s).

    Column sums give p_st. A state with zero stationary mass leaves a zero column,
    so no Bayes weight is formed for it.
    """

    pair = np.zeros((2, 2))
    for l in (1, 2):
        column = kernels.stationary_column(l, p)[np.newaxis, :]
        pair += p.q[l - 1] * kernels.memory_kernel(l, tau, p).entries * column
    return pair


def _brute_force_report(joint: ThreePointJoint, p: FunessParams, method: str) -> MiReport:
    arr = joint.p
    h_lambda = entropy(arr.sum(axis=0)) - entropy(arr.sum(axis=(0, 2)))
    per_state = []
    for l in (0, 1):
        mass = arr[l].sum()
        if mass > 0:
            conditional = arr[l] / mass
            per_state.append(entropy(conditional) - entropy(conditional.sum(axis=1)))
        else:
            per_state.append(float("nan"))
    return MiReport(
        tau=joint.tau,
        cmi=cmi_from_joint(arr),
        h_lambda=h_lambda,
        h_kernels=(per_state[0], per_state[1]),
        method=method,
    )


def conditional_mutual_information(tau: float, p: FunessParams, method: MiMethod = "closed_form") -> MiReport:
    """Stationary I(X_t; X_t0 | X_s) at lag ``tau`` (``math.inf`` allowed)."""

    if tau < 0:
        raise OutOfRangeError(f"out_of_range:tau={tau}:>=0")
    if method == "brute_force":
        joint = three_point_joint(p.t0 + tau, p.t0, p, stationary=True)
        return _brute_force_report(joint, p, method)
    if method != "closed_form":
        raise OutOfRangeError(f"out_of_range:method={method}")

    pair = stationary_pair_joint(tau, p)
    h_lambda = entropy(pair) - entropy(pair.sum(axis=0))
    h_kernels = tuple(
        mixed_entropy(kernels.memory_kernel(l, tau, p).entries, kernels.stationary_column(l, p)) for l in (1, 2)
    )
    cmi = math.fsum(q_l * (h_lambda - h_l) for q_l, h_l in zip(p.q, h_kernels))
    return MiReport(tau=tau, cmi=cmi, h_lambda=h_lambda, h_kernels=h_kernels, method=method)


def mutual_information_finite(t: float, s: float, p: FunessParams) -> MiReport:
    """I(X_t; X_t0 | X_s) at finite s - t0, by brute force from the three-point joint."""
    return _brute_force_report(three_point_joint(t, s, p), p, "brute_force_finite")


def entropy_difference(tau: float, p: FunessParams) -> float:
    """Averaged entropy gap between p(x,t;y,s|z,t0) and p(x,t|y,s) p(y,s|z,t0).

    Expanding the expression term by term gives -I(X_t; X_t0 | X_s); that signed
    value is returned. Its magnitude is the conditional mutual information.
    """

    if tau < 0:
        raise OutOfRangeError(f"out_of_range:tau={tau}:>=0")
    pair = stationary_pair_joint(tau, p)
    marginal = pair.sum(axis=0)
    lam_st = np.divide(pair, marginal, out=np.zeros_like(pair), where=marginal > 0)
    gaps = []
    for l in (1, 2):
        column = kernels.stationary_column(l, p)[np.newaxis, :]
        true_joint = kernels.memory_kernel(l, tau, p).entries * column
        factorized = lam_st * column
        gaps.append(p.q[l - 1] * (entropy(true_joint) - entropy(factorized)))
    return math.fsum(gaps)


def entropy_functional_terms(tau: float, p: FunessParams) -> ChainRuleTerms:
    """Chain-rule pieces of the entropy functional at lag ``tau``.

    H(X_t|X_s) - H(X_t|X_s,X_t0) equals I(X_t;X_t0|X_s), which the chain rule also
    writes as I(X_t;X_s|X_t0) + I(X_t;X_t0) - I(X_t;X_s).
    """

    arr = three_point_joint(p.t0 + tau, p.t0, p, stationary=True).p
    h_0 = entropy(arr.sum(axis=(1, 2)))
    h_s = entropy(arr.sum(axis=(0, 2)))
    h_t = entropy(arr.sum(axis=(0, 1)))
    h_0s = entropy(arr.sum(axis=2))
    h_0t = entropy(arr.sum(axis=1))
    h_st = entropy(arr.sum(axis=0))
    h_0st = entropy(arr)
    return ChainRuleTerms(
        i_ts_given_0=h_0t + h_0s - h_0st - h_0,
        i_t0=h_t + h_0 - h_0t,
        i_ts=h_t + h_s - h_st,
        i_t0_given_s=cmi_from_joint(arr),
        h_t_given_s=h_st - h_s,
        h_t_given_s0=h_0st - h_0s,
    )
