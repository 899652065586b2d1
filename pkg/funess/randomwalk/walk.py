"""Random walk S(t) = X_t0 + sum over Poisson epochs t_k of X_{t_k}.

The epoch clock is a homogeneous Poisson process independent of X. Increments
are either read from one continuously evolving Funessian path ("trajectory") or
drawn independently from the one-time marginal at each epoch ("marginal"). The
second reading is the one the walk master equation and the closed-form variance
describe; the first adds the covariance of X between epochs.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Literal, Sequence

import numpy as np
from scipy import stats

from funess.features import kernels
from funess.features.params import FunessParams, WalkParams
from funess.features.validators import OutOfRangeError, ensure_ordered, ensure_positive, ensure_state
from funess.montecarlo.estimators import EstimateWithError
from funess.montecarlo.rng import map_streams, stream_generator
from funess.montecarlo.trajectory import draw_path

logger = logging.getLogger(__name__)

Increments = Literal["trajectory", "marginal"]

MIN_WALK_SAMPLES = 1000
GRID_TOL = 1e-12


class GridMismatchError(ValueError):
    """Raised when a read-out time is not on the ensemble grid."""


@dataclass(frozen=True, eq=False)
class WalkSample:
    grid: np.ndarray
    values: np.ndarray
    jump_epochs: np.ndarray
    initial_state: int


@dataclass(frozen=True, eq=False)
class WalkEnsemble:
    """Walk values on a common grid; row ``i`` is stream ``i``."""

    params: WalkParams
    grid: np.ndarray
    values: np.ndarray
    initial_states: np.ndarray
    increments: str = "trajectory"

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def column(self, t: float) -> np.ndarray:
        hits = np.flatnonzero(np.abs(self.grid - t) <= GRID_TOL * max(1.0, abs(t)))
        if not hits.size:
            raise GridMismatchError(f"grid_mismatch:t={t}")
        return self.values[:, hits[0]]


@dataclass(frozen=True)
class WalkMoments:
    mean: float
    variance: float
    M1: float
    M2: float
    d_eff: float


@dataclass(frozen=True)
class WalkMomentEstimate:
    t: float
    mean: EstimateWithError
    variance: EstimateWithError


def _check_grid(grid: Sequence[float], t0: float, horizon: float) -> np.ndarray:
    arr = np.asarray(grid, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise OutOfRangeError("out_of_range:grid:empty")
    ensure_ordered([("t0", t0)] + [(f"grid[{i}]", float(v)) for i, v in enumerate(arr)] + [("end", t0 + horizon)])
    return arr


def _poisson_epochs(rng: np.random.Generator, lam: float, t0: float, horizon: float) -> np.ndarray:
    count = rng.poisson(lam * horizon)
    return np.sort(t0 + horizon * rng.random(count))


def _walk_increments(
    rng: np.random.Generator, w: WalkParams, horizon: float, increments: Increments
) -> tuple[int, np.ndarray, np.ndarray]:
    p = w.base
    if increments == "trajectory":
        initial, jump_times = draw_path(rng, p, horizon)
        epochs = _poisson_epochs(rng, w.lam, p.t0, horizon)
        flips = np.searchsorted(jump_times, epochs, side="right") % 2
        states = np.where(flips == 0, initial, 3 - initial)
    elif increments == "marginal":
        initial = 1 if rng.random() < p.q1 else 2
        epochs = _poisson_epochs(rng, w.lam, p.t0, horizon)
        states = np.where(rng.random(epochs.size) < kernels.marginal_x1(epochs, p), 1, 2)
    else:
        raise OutOfRangeError(f"out_of_range:increments={increments}")
    return initial, epochs, p.values[states - 1]


def sample_walk(
    w: WalkParams,
    horizon: float,
    grid: Sequence[float],
    seed: int,
    stream: int = 0,
    increments: Increments = "trajectory",
) -> WalkSample:
    ensure_positive(horizon, "horizon")
    grid_arr = _check_grid(grid, w.base.t0, horizon)
    rng = stream_generator(seed, stream)
    initial, epochs, steps = _walk_increments(rng, w, horizon, increments)
    partial = np.concatenate([[0.0], np.cumsum(steps)])
    start = w.base.values[initial - 1]
    values = start + partial[np.searchsorted(epochs, grid_arr, side="right")]
    return WalkSample(grid=grid_arr, values=values, jump_epochs=epochs, initial_state=initial)


def sample_walk_ensemble(
    w: WalkParams,
    n: int,
    horizon: float,
    grid: Sequence[float],
    seed: int,
    workers: int = 1,
    increments: Increments = "trajectory",
) -> WalkEnsemble:
    if n < 1:
        raise OutOfRangeError(f"out_of_range:n={n}:>=1")
    grid_arr = _check_grid(grid, w.base.t0, horizon)

    def draw(chunk: range) -> List[WalkSample]:
        return [sample_walk(w, horizon, grid_arr, seed, stream, increments) for stream in chunk]

    samples = map_streams(draw, n, workers)
    logger.info("Sampled %d walks (%s increments) with seed %d", n, increments, seed)
    return WalkEnsemble(
        params=w,
        grid=grid_arr,
        values=np.vstack([sample.values for sample in samples]),
        initial_states=np.array([sample.initial_state for sample in samples], dtype=np.int8),
        increments=increments,
    )


def _initial_moment(p: FunessParams, order: int) -> float:
    return float(p.q @ p.values**order)


def _stationary_moment(p: FunessParams, order: int) -> float:
    """M_1 = (1-r) x1 + (1-k) x2 and M_2 = (1-r) x1^2 + (1-k) x2^2."""
    return (1.0 - p.r) * p.x1**order + (1.0 - p.k) * p.x2**order


def marginal_moment(t: float, w: WalkParams, order: int = 1) -> float:
    """<X_t^order> for order 1 or 2 at absolute time ``t >= t0``."""

    p = w.base
    if order not in (1, 2):
        raise OutOfRangeError(f"out_of_range:order={order}:1..2")
    ensure_ordered([("t0", p.t0), ("t", t)])
    m = _stationary_moment(p, order)
    x0 = _initial_moment(p, order)
    e = math.exp(-p.alpha * (t - p.t0))
    return m + (p.k + p.r - 1.0) * x0 + ((2.0 - p.k - p.r) * x0 - m) * e


def walk_moments_analytic(t: float, w: WalkParams) -> WalkMoments:
    """Mean and variance of S(t) for increments drawn from the one-time marginal."""

    p = w.base
    ensure_ordered([("t0", p.t0), ("t", t)])
    elapsed = t - p.t0
    relaxed = -math.expm1(-p.alpha * elapsed) / p.alpha
    memory = p.k + p.r - 1.0
    m1, m2 = _stationary_moment(p, 1), _stationary_moment(p, 2)
    x0_1, x0_2 = _initial_moment(p, 1), _initial_moment(p, 2)

    mean = x0_1 + w.lam * (m1 + memory * x0_1) * elapsed + w.lam * ((2.0 - p.k - p.r) * x0_1 - m1) * relaxed
    variance = (
        (x0_2 - x0_1**2)
        + w.lam * (m2 + memory * x0_2) * elapsed
        + w.lam * ((2.0 - p.k - p.r) * x0_2 - m2) * relaxed
    )
    return WalkMoments(mean=mean, variance=variance, M1=m1, M2=m2, d_eff=effective_diffusion(w))


def effective_diffusion(w: WalkParams) -> float:
    """D_eff = (lambda / 2) (M_2 + (k + r - 1) <X_t0^2>)."""
    p = w.base
    return 0.5 * w.lam * (_stationary_moment(p, 2) + (p.k + p.r - 1.0) * _initial_moment(p, 2))


def correlated_diffusion(w: WalkParams, initial_state: int) -> float:
    """Half the late-time variance slope of the trajectory-read walk started in ``initial_state``.

    Adds the integrated covariance pi1 pi2 (x1 - x2)^2 exp(-alpha |u - v|) of the
    conditioned chain to the independent-increment term.
    """

    p = w.base
    pi = kernels.stationary_column(ensure_state(initial_state), p)
    second = float(pi @ p.values**2)
    return 0.5 * w.lam * second + w.lam**2 * pi[0] * pi[1] * (p.x1 - p.x2) ** 2 / p.alpha


def estimate_walk_moments(ensemble: WalkEnsemble, t: float) -> WalkMomentEstimate:
    """Sample mean and variance of S(t) with their standard errors."""

    if ensemble.n < MIN_WALK_SAMPLES:
        raise OutOfRangeError(f"out_of_range:n={ensemble.n}:>={MIN_WALK_SAMPLES}")
    column = ensemble.column(t)
    n = column.size
    mean = float(column.mean())
    centred = column - mean
    variance = float(np.mean(centred**2))
    fourth = float(np.mean(centred**4))
    return WalkMomentEstimate(
        t=t,
        mean=EstimateWithError(mean, math.sqrt(variance / n), n),
        variance=EstimateWithError(variance * n / (n - 1), math.sqrt(max(0.0, fourth - variance**2) / n), n),
    )


def fit_variance_slope(ensemble: WalkEnsemble, t_min: float, t_max: float) -> EstimateWithError:
    """Least-squares slope of the sample variance of S over grid times in [t_min, t_max]."""

    ensure_ordered([("t_min", t_min), ("t_max", t_max)])
    chosen = ensemble.grid[(ensemble.grid >= t_min) & (ensemble.grid <= t_max)]
    if chosen.size < 3:
        raise OutOfRangeError(f"out_of_range:grid_points={chosen.size}:>=3")
    variances = np.array([ensemble.column(t).var(ddof=1) for t in chosen])
    fit = stats.linregress(chosen, variances)
    return EstimateWithError(value=float(fit.slope), stderr=float(fit.stderr), n=ensemble.n)
