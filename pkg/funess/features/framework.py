"""General d-state framework for processes with memory of the first event.

A process is specified by its values, initial law q and a family of one-point
memory kernels ``kernel(l, t, s) = Q^(l)(t|s, t0)``. Everything else
(Lambda(t|t0), the intermediate Lambda(t|s), joints of any order) is assembled
from those kernels.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from funess.features import kernels
from funess.features.matrix import ColumnStochasticMatrix
from funess.features.params import FunessParams
from funess.features.validators import (
    COLUMN_SUM_TOL,
    OutOfRangeError,
    StochasticityError,
    TimeOrderError,
    ZeroMarginalError,
    ensure_ordered,
    ensure_simplex,
    ensure_state,
)

KernelFamily = Callable[[int, float, float], ColumnStochasticMatrix]

CONSISTENCY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GeneralProcessSpec:
    values: np.ndarray
    q: np.ndarray
    kernel: KernelFamily
    t0: float = 0.0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        q = ensure_simplex(self.q, "q")
        if values.shape != q.shape:
            raise OutOfRangeError(f"out_of_range:values/q:{values.shape}!={q.shape}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "q", q)
        for l in range(1, q.size + 1):
            at_origin = self.kernel(l, self.t0, self.t0)
            if np.max(np.abs(np.asarray(at_origin) - np.eye(q.size))) > COLUMN_SUM_TOL:
                raise StochasticityError(f"kernel_not_identity:l={l}")

    @property
    def d(self) -> int:
        return self.q.size

    @classmethod
    def from_funess(cls, p: FunessParams) -> "GeneralProcessSpec":
        """The two-state Funessian instance."""
        return cls(
            values=p.values,
            q=p.q,
            kernel=lambda l, t, s: kernels.memory_kernel(l, t - s, p),
            t0=p.t0,
        )


Process = Union[FunessParams, GeneralProcessSpec]


def as_spec(process: Process) -> GeneralProcessSpec:
    if isinstance(process, GeneralProcessSpec):
        return process
    return GeneralProcessSpec.from_funess(process)


def lambda_initial_general(spec: GeneralProcessSpec, t: float) -> ColumnStochasticMatrix:
    """Lambda(t|t0): column j is column j of Q^(j)(t|t0, t0)."""
    ensure_ordered([("t0", spec.t0), ("t", t)])
    columns = [spec.kernel(j, t, spec.t0).column(j) for j in range(1, spec.d + 1)]
    return ColumnStochasticMatrix(np.column_stack(columns))


def intermediate_lambda_general(spec: GeneralProcessSpec, t: float, s: float) -> ColumnStochasticMatrix:
    """Compact form sum_l Q^(l)(t|s, t0) D^(l)(s|t0) for any kernel family."""

    ensure_ordered([("t0", spec.t0), ("s", s), ("t", t)])
    joint = lambda_initial_general(spec, s).entries * spec.q[np.newaxis, :]
    marginal = joint.sum(axis=1)
    empty = np.flatnonzero(marginal <= 0.0)
    if empty.size:
        raise ZeroMarginalError(f"zero_marginal:state={int(empty[0]) + 1}:s={s}")
    total = np.zeros((spec.d, spec.d))
    for l in range(1, spec.d + 1):
        weights = joint[:, l - 1] / marginal
        total += np.asarray(spec.kernel(l, t, s)) * weights[np.newaxis, :]
    return ColumnStochasticMatrix(total)


def joint_probability(times: Sequence[float], states: Sequence[int], process: Process) -> float:
    """p(x_jm, tm; ...; x_j1, t1; x_j0, t0) for ascending ``times`` starting at t0.

    Equals q_j0 Lambda(t1|t0)_{j1 j0} prod_i Q^(j0)(t_i|t_{i-1})_{j_i j_{i-1}}.
    """

    spec = as_spec(process)
    if len(times) != len(states) or not times:
        raise OutOfRangeError(f"out_of_range:times/states:{len(times)}!={len(states)}")
    if times[0] != spec.t0:
        raise TimeOrderError(f"time_order:origin={times[0]}!=t0={spec.t0}")
    ensure_ordered([(f"t{i}", float(value)) for i, value in enumerate(times)])
    indices = [ensure_state(j, spec.d) for j in states]

    first = indices[0]
    prob = float(spec.q[first - 1])
    if len(times) > 1:
        prob *= lambda_initial_general(spec, times[1])[indices[1] - 1, first - 1]
    for i in range(2, len(times)):
        step = spec.kernel(first, times[i], times[i - 1])
        prob *= step[indices[i] - 1, indices[i - 1] - 1]
    return float(prob)


def marginalization_residual(times: Sequence[float], process: Process, drop: int) -> float:
    """Largest gap between a joint summed over interior index ``drop`` and the reduced joint."""

    spec = as_spec(process)
    if not 0 < drop < len(times) - 1:
        raise OutOfRangeError(f"out_of_range:drop={drop}:interior")
    reduced_times = [t for i, t in enumerate(times) if i != drop]
    worst = 0.0
    for reduced in itertools.product(range(1, spec.d + 1), repeat=len(reduced_times)):
        summed = 0.0
        for j in range(1, spec.d + 1):
            full = list(reduced[:drop]) + [j] + list(reduced[drop:])
            summed += joint_probability(times, full, spec)
        worst = max(worst, abs(summed - joint_probability(reduced_times, reduced, spec)))
    return worst


def check_composition(process: Process, t_early: float, t_mid: float, t_late: float) -> float:
    """max_l |Q^(l)(t|t'') - Q^(l)(t|t') Q^(l)(t'|t'')| for t'' <= t' <= t."""

    spec = as_spec(process)
    ensure_ordered([("t''", t_early), ("t'", t_mid), ("t", t_late)])
    residual = 0.0
    for l in range(1, spec.d + 1):
        direct = np.asarray(spec.kernel(l, t_late, t_early))
        composed = np.asarray(spec.kernel(l, t_late, t_mid)) @ np.asarray(spec.kernel(l, t_mid, t_early))
        residual = max(residual, float(np.max(np.abs(direct - composed))))
    return residual


@dataclass(frozen=True)
class ConsistencyReport:
    consistent: bool
    distance: float
    intermediate_distance: float | None = None


def check_consistency(process: Process, t: float, s: float) -> ConsistencyReport:
    """Markov consistency: all Q^(l)(t|s) coincide (and then equal Lambda(t|s))."""

    spec = as_spec(process)
    ensure_ordered([("s", s), ("t", t)])
    mats = [np.asarray(spec.kernel(l, t, s)) for l in range(1, spec.d + 1)]
    distance = max(
        (float(np.max(np.abs(a - b))) for a, b in itertools.combinations(mats, 2)),
        default=0.0,
    )
    consistent = distance <= CONSISTENCY_TOL
    intermediate_distance = None
    if consistent and s >= spec.t0:
        try:
            assembled = intermediate_lambda_general(spec, t, s)
        except ZeroMarginalError:
            assembled = None
        if assembled is not None:
            intermediate_distance = assembled.max_abs_diff(mats[0])
    return ConsistencyReport(consistent=consistent, distance=distance, intermediate_distance=intermediate_distance)
