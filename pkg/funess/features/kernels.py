"""Closed-form kernels of the two-state Funessian process and its master equation.

All matrices follow the column-stochastic convention ``M[j, k] = P(x_j | x_k)``
and compose by left multiplication. State numbers are 1-based.
"""
from __future__ import annotations

import math
from typing import Callable, Final, Iterable, Literal, Union

import numpy as np

from funess.features.matrix import ColumnStochasticMatrix, DiagonalWeights, GeneratorSnapshot
from funess.features.params import FunessParams
from funess.features.validators import (
    OutOfRangeError,
    StepTooLargeError,
    TimeOrderError,
    ZeroMarginalError,
    ensure_ordered,
    ensure_simplex,
    ensure_state,
)

STATIONARY: Final = "stationary"
MAX_STEP_ALPHA = 0.1

Instant = Union[float, Literal["stationary"]]


def _relaxation(tau: float, alpha: float) -> tuple[float, float]:
    """Return ``(e, 1 - e)`` with ``e = exp(-alpha * tau)``."""
    return math.exp(-alpha * tau), -math.expm1(-alpha * tau)


def stationary_column(l: int, p: FunessParams) -> np.ndarray:
    """Stationary column of Q^(l): (k, 1-k) for l=1 and (1-r, r) for l=2."""
    l = ensure_state(l)
    if l == 1:
        return np.array([p.k, 1.0 - p.k])
    return np.array([1.0 - p.r, p.r])


def holding_rates(l: int, p: FunessParams) -> tuple[float, float]:
    """Exit rates (out of x1, out of x2) of the chain conditioned on X_t0 = x_l."""
    a, b = stationary_column(l, p)
    return p.alpha * b, p.alpha * a


def memory_kernel(l: int, tau2: float, p: FunessParams) -> ColumnStochasticMatrix:
    """One-point memory matrix Q^(l)(t|s, t0) with tau2 = t - s."""

    l = ensure_state(l)
    if tau2 < 0:
        raise TimeOrderError(f"time_order:tau2={tau2}<0")
    a, b = stationary_column(l, p)
    e, one_minus_e = _relaxation(tau2, p.alpha)
    return ColumnStochasticMatrix(
        np.array(
            [
                [a + b * e, a * one_minus_e],
                [b * one_minus_e, b + a * e],
            ]
        )
    )


def determinant(tau1: float, p: FunessParams) -> float:
    """det(Lambda(t|t0)) = k + r - 1 + (2 - k - r) exp(-alpha * tau1)."""
    e, _ = _relaxation(tau1, p.alpha)
    return p.k + p.r - 1.0 + (2.0 - p.k - p.r) * e


def lambda_initial(tau1: float, p: FunessParams) -> ColumnStochasticMatrix:
    """Lambda(t|t0) assembled column by column from the memory kernels."""

    if tau1 < 0:
        raise TimeOrderError(f"time_order:tau1={tau1}<0")
    columns = [memory_kernel(j, tau1, p).column(j) for j in (1, 2)]
    return ColumnStochasticMatrix(np.column_stack(columns))


def lambda_stationary(p: FunessParams) -> ColumnStochasticMatrix:
    """Lambda_st(s|t0) = [[k, 1-r], [1-k, r]], the t0 -> -inf limit."""
    return ColumnStochasticMatrix(np.column_stack([stationary_column(1, p), stationary_column(2, p)]))


def stationary_distribution(p: FunessParams) -> np.ndarray:
    """p_st = Lambda_st q; depends on the initial distribution unless k + r = 1."""
    return lambda_stationary(p) @ p.q


def marginal_x1(times: Union[float, np.ndarray], p: FunessParams) -> np.ndarray:
    """Vectorised p(x1, t) = (Lambda(t|t0) q)_1 for absolute times ``t >= t0``."""
    e = np.exp(-p.alpha * (np.asarray(times, dtype=float) - p.t0))
    return (p.k + (1.0 - p.k) * e) * p.q1 + (1.0 - p.r) * (1.0 - e) * p.q2


def gamma_divisor(t: float, s: float, p: FunessParams) -> ColumnStochasticMatrix:
    """Gamma(t|s) = Lambda(t|t0) Lambda(s|t0)^-1, the stochastic divisor."""

    ensure_ordered([("t0", p.t0), ("s", s), ("t", t)])
    e_s, _ = _relaxation(s - p.t0, p.alpha)
    _, one_minus_e = _relaxation(t - s, p.alpha)
    det_s = determinant(s - p.t0, p)
    g11 = 1.0 - (1.0 - p.k) * e_s * one_minus_e / det_s
    g22 = 1.0 - (1.0 - p.r) * e_s * one_minus_e / det_s
    return ColumnStochasticMatrix(np.array([[g11, 1.0 - g22], [1.0 - g11, g22]]))


def bayes_weights(l: int, s: Instant, p: FunessParams) -> DiagonalWeights:
    """Weights a_j^(l) = q_l Lambda(s|t0)_jl / sum_m q_m Lambda(s|t0)_jm.

    ``s`` may be the ``STATIONARY`` sentinel, which substitutes Lambda_st.
    """

    l = ensure_state(l)
    if isinstance(s, str):
        if s != STATIONARY:
            raise TimeOrderError(f"time_order:s={s!r}:not_a_time")
        lam = lambda_stationary(p)
    else:
        ensure_ordered([("t0", p.t0), ("s", s)])
        lam = lambda_initial(s - p.t0, p)
    joint = lam.entries * p.q[np.newaxis, :]
    marginal = joint.sum(axis=1)
    empty = np.flatnonzero(marginal <= 0.0)
    if empty.size:
        raise ZeroMarginalError(f"zero_marginal:state={int(empty[0]) + 1}:s={s}")
    return DiagonalWeights(l=l, a=joint[:, l - 1] / marginal)


def intermediate_lambda(t: float, s: float, p: FunessParams, *, stationary: bool = False) -> ColumnStochasticMatrix:
    """Lambda(t|s) = sum_l Q^(l)(t|s, t0) D^(l)(s|t0).

    The result depends on q and t0, which is the non-Markov signature. With
    ``stationary=True`` the Bayes weights use Lambda_st and only ``t - s`` matters.
    """

    if stationary:
        ensure_ordered([("s", s), ("t", t)])
        when: Instant = STATIONARY
    else:
        ensure_ordered([("t0", p.t0), ("s", s), ("t", t)])
        when = s
    total = np.zeros((2, 2))
    for l in (1, 2):
        weights = bayes_weights(l, when, p)
        total += memory_kernel(l, t - s, p).entries @ weights.as_matrix()
    return ColumnStochasticMatrix(total)


def rate_factor(t: float, p: FunessParams) -> float:
    """w(t, t0) = alpha exp(-alpha (t - t0)) / det(Lambda(t|t0)); exactly alpha when Markov."""
    if p.markov_flag:
        return p.alpha
    e, _ = _relaxation(t - p.t0, p.alpha)
    return p.alpha * e / determinant(t - p.t0, p)


def generator_matrix(p: FunessParams) -> np.ndarray:
    """Constant part L of the generator; columns sum to zero."""
    return np.array([[-(1.0 - p.k), 1.0 - p.r], [1.0 - p.k, -(1.0 - p.r)]])


def generator(t: float, p: FunessParams) -> GeneratorSnapshot:
    ensure_ordered([("t0", p.t0), ("t", t)])
    w = rate_factor(t, p)
    return GeneratorSnapshot(w=w, L=generator_matrix(p), W12=(1.0 - p.r) * w, W21=(1.0 - p.k) * w)


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """Advance ``dy/dt = f(t, y)`` by one classical fourth-order Runge-Kutta step."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def master_rhs(p: FunessParams) -> Callable[[float, np.ndarray], np.ndarray]:
    """Right-hand side of dp/dt = w(t, t0) L p."""
    L = generator_matrix(p)
    return lambda t, y: rate_factor(t, p) * (L @ y)


def check_step(step: float, p: FunessParams) -> float:
    if not step > 0:
        raise OutOfRangeError(f"out_of_range:step={step}:>0")
    if step > MAX_STEP_ALPHA / p.alpha:
        raise StepTooLargeError(f"step_too_large:step={step}>{MAX_STEP_ALPHA / p.alpha:.6g}")
    return step


def time_grid(start: float, end: float, step: float) -> np.ndarray:
    """Uniform grid from ``start`` to ``end`` whose spacing does not exceed ``step``."""
    n_steps = max(1, math.ceil((end - start) / step - 1e-9))
    return np.linspace(start, end, n_steps + 1)


def propagate_master(q0: Iterable[float], t_end: float, step: float, p: FunessParams) -> np.ndarray:
    """Integrate the time-local master equation from t0 to ``t_end`` with fixed-step RK4."""

    y = ensure_simplex(q0, "q0")
    check_step(step, p)
    ensure_ordered([("t0", p.t0), ("t_end", t_end)])
    if t_end == p.t0:
        return y.copy()
    rhs = master_rhs(p)
    grid = time_grid(p.t0, t_end, step)
    for left, right in zip(grid[:-1], grid[1:]):
        y = rk4_step(rhs, left, y, right - left)
    return y
