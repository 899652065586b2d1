"""Validation helpers for process parameters, times and matrices."""
from __future__ import annotations

from typing import Iterable, Sequence, Tuple

import numpy as np
import pandas as pd

NEGATIVE_CLAMP = 1e-14
COLUMN_SUM_TOL = 1e-12
SIMPLEX_TOL = 1e-12


class OutOfRangeError(ValueError):
    """Raised when a probability, rate or size lies outside its admissible range."""


class MemoryRegimeError(ValueError):
    """Raised when k + r < 1, where det(Lambda) may vanish."""


class BadIndexError(ValueError):
    """Raised when a state number is not one of 1..d."""


class TimeOrderError(ValueError):
    """Raised when times violate t0 <= s <= t."""


class ZeroMarginalError(ValueError):
    """Raised when conditioning on a state of zero probability."""


class StepTooLargeError(ValueError):
    """Raised when an integrator step exceeds 0.1/alpha."""


class StochasticityError(ValueError):
    """Raised when a matrix is not column-stochastic within tolerance."""


class SchemaValidationError(ValueError):
    """Raised when required columns are missing from a table."""


def ensure_probability(value: float, label: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise OutOfRangeError(f"out_of_range:{label}={value}:[0,1]")
    return value


def ensure_positive(value: float, label: str) -> float:
    value = float(value)
    if not value > 0.0:
        raise OutOfRangeError(f"out_of_range:{label}={value}:>0")
    return value


def ensure_state(l: int, d: int = 2) -> int:
    """Return ``l`` as a 1-based state number, rejecting anything outside 1..d."""

    if isinstance(l, bool) or not isinstance(l, (int, np.integer)) or not 1 <= int(l) <= d:
        raise BadIndexError(f"bad_index:{l}:1..{d}")
    return int(l)


def ensure_ordered(times: Sequence[Tuple[str, float]]) -> None:
    """Ensure labelled times are non-decreasing, e.g. ``[("t0", 0), ("s", .5), ("t", 1)]``."""

    for (prev_label, prev), (label, value) in zip(times, times[1:]):
        if value < prev:
            raise TimeOrderError(f"time_order:{label}={value}<{prev_label}={prev}")


def ensure_simplex(vector: Iterable[float], label: str, atol: float = SIMPLEX_TOL) -> np.ndarray:
    arr = np.asarray(vector, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise OutOfRangeError(f"out_of_range:{label}:not_a_vector")
    if np.any(arr < 0.0) or abs(arr.sum() - 1.0) > atol:
        raise OutOfRangeError(f"out_of_range:{label}={arr.tolist()}:simplex")
    return arr


def ensure_column_stochastic(entries: np.ndarray, label: str = "matrix") -> np.ndarray:
    """Clamp round-off negatives and check unit column sums.

    Entries within ``NEGATIVE_CLAMP`` below zero are set to zero; anything more
    negative is a logic error and raises.
    """

    arr = np.array(entries, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise StochasticityError(f"not_square:{label}:{arr.shape}")
    if np.any(~np.isfinite(arr)):
        raise StochasticityError(f"not_finite:{label}")
    if np.any(arr < -NEGATIVE_CLAMP):
        raise StochasticityError(f"negative_entry:{label}:{arr.min():.3e}")
    arr[arr < 0.0] = 0.0
    sums = arr.sum(axis=0)
    bad = np.flatnonzero(np.abs(sums - 1.0) > COLUMN_SUM_TOL)
    if bad.size:
        cols = ",".join(str(int(c) + 1) for c in bad)
        raise StochasticityError(f"column_sum:{label}:{cols}")
    return arr


def ensure_required_columns(frame: pd.DataFrame, required: Iterable[str], label: str) -> None:
    missing = [col for col in required if col not in frame.columns]
    if missing:
        raise SchemaValidationError(f"missing_columns:{label}:{','.join(sorted(missing))}")
