"""Exact event-driven sampling of Funessian sample paths.

Conditioned on the first event X_t0 = x_l the path is the homogeneous two-state
chain generated by Q^(l), so holding times are exponential and no time
discretisation is involved. Paths are right-continuous.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from funess.features import kernels
from funess.features.params import FunessParams
from funess.features.validators import OutOfRangeError, ensure_positive
from funess.montecarlo.rng import map_streams, stream_generator

logger = logging.getLogger(__name__)

BATCH = 64  # even, so a full batch of jumps returns to the batch's starting state


class OutOfWindowError(ValueError):
    """Raised when a read-out time lies outside [t0, t0 + horizon]."""


@dataclass(frozen=True, eq=False)
class Trajectory:
    initial_state: int
    jump_times: np.ndarray
    states: np.ndarray
    t0: float
    horizon: float
    stream: int = 0

    @property
    def end(self) -> float:
        return self.t0 + self.horizon


def draw_path(rng: np.random.Generator, p: FunessParams, horizon: float) -> tuple[int, np.ndarray]:
    """Return the initial state and the jump times of one path on [t0, t0 + horizon]."""

    initial = 1 if rng.random() < p.q1 else 2
    out_of_x1, out_of_x2 = kernels.holding_rates(initial, p)
    first, second = (out_of_x1, out_of_x2) if initial == 1 else (out_of_x2, out_of_x1)
    rates = np.resize([first, second], BATCH)

    end = p.t0 + horizon
    now = p.t0
    pieces: List[np.ndarray] = []
    while True:
        holding = np.divide(rng.standard_exponential(BATCH), rates, out=np.full(BATCH, np.inf), where=rates > 0)
        epochs = now + np.cumsum(holding)
        inside = epochs[epochs <= end]
        pieces.append(inside)
        if inside.size < BATCH:
            break
        now = epochs[-1]
    return initial, np.concatenate(pieces)


def _alternating_states(initial: int, n_jumps: int) -> np.ndarray:
    other = 3 - initial
    return np.where(np.arange(n_jumps) % 2 == 0, other, initial).astype(np.int8)


def sample_trajectory(p: FunessParams, horizon: float, seed: int, stream: int = 0) -> Trajectory:
    ensure_positive(horizon, "horizon")
    initial, times = draw_path(stream_generator(seed, stream), p, horizon)
    return Trajectory(
        initial_state=initial,
        jump_times=times,
        states=_alternating_states(initial, times.size),
        t0=p.t0,
        horizon=horizon,
        stream=stream,
    )


def _check_window(t: float, t0: float, end: float) -> None:
    if not t0 <= t <= end:
        raise OutOfWindowError(f"out_of_window:t={t}:[{t0},{end}]")


def read_state(traj: Trajectory, t: float) -> int:
    """State in force at time ``t``; at a jump time the post-jump state is returned."""
    _check_window(t, traj.t0, traj.end)
    jumps = int(np.searchsorted(traj.jump_times, t, side="right"))
    return traj.initial_state if jumps % 2 == 0 else 3 - traj.initial_state


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Independent trajectories stored as flat arrays.

    Trajectory ``i`` owns ``jump_times[offsets[i]:offsets[i + 1]]`` and was drawn
    from stream ``i`` of ``seed``.
    """

    params: FunessParams
    horizon: float
    initial_states: np.ndarray
    offsets: np.ndarray
    jump_times: np.ndarray
    seed: Optional[int] = None

    @property
    def n(self) -> int:
        return int(self.initial_states.size)

    @property
    def t0(self) -> float:
        return self.params.t0

    @property
    def end(self) -> float:
        return self.params.t0 + self.horizon

    @property
    def jump_counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def trajectory(self, i: int) -> Trajectory:
        times = self.jump_times[self.offsets[i] : self.offsets[i + 1]]
        initial = int(self.initial_states[i])
        return Trajectory(
            initial_state=initial,
            jump_times=times,
            states=_alternating_states(initial, times.size),
            t0=self.t0,
            horizon=self.horizon,
            stream=i,
        )

    @classmethod
    def from_trajectories(
        cls, params: FunessParams, horizon: float, trajectories: List[Trajectory], seed: Optional[int] = None
    ) -> "Ensemble":
        counts = np.array([traj.jump_times.size for traj in trajectories], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        times = np.concatenate([traj.jump_times for traj in trajectories]) if trajectories else np.empty(0)
        initial = np.array([traj.initial_state for traj in trajectories], dtype=np.int8)
        return cls(params=params, horizon=horizon, initial_states=initial, offsets=offsets, jump_times=times, seed=seed)


def sample_ensemble(p: FunessParams, n: int, horizon: float, seed: int, workers: int = 1) -> Ensemble:
    """Draw ``n`` trajectories on streams 0..n-1; the result does not depend on ``workers``."""

    if n < 1:
        raise OutOfRangeError(f"out_of_range:n={n}:>=1")
    ensure_positive(horizon, "horizon")

    def draw(chunk: range) -> List[Trajectory]:
        return [sample_trajectory(p, horizon, seed, stream) for stream in chunk]

    trajectories = map_streams(draw, n, workers)
    ensemble = Ensemble.from_trajectories(p, horizon, trajectories, seed=seed)
    logger.info("Sampled %d trajectories (%d jumps) with seed %d", n, ensemble.jump_times.size, seed)
    return ensemble


def read_states(ensemble: Ensemble, t: float) -> np.ndarray:
    """Vectorised :func:`read_state` over every trajectory at one time ``t``."""

    t = float(t)
    _check_window(t, ensemble.t0, ensemble.end)
    passed = np.concatenate([[0], np.cumsum(ensemble.jump_times <= t)])
    jumps = passed[ensemble.offsets[1:]] - passed[ensemble.offsets[:-1]]
    return np.where(jumps % 2 == 0, ensemble.initial_states, 3 - ensemble.initial_states).astype(np.int8)


def state_values(ensemble: Ensemble, states: np.ndarray) -> np.ndarray:
    """Map 1-based states to the process values x1, x2."""
    return ensemble.params.values[np.asarray(states, dtype=np.intp) - 1]
