"""Matrix carriers: column-stochastic transition matrices, Bayes weights, generators."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from funess.features.validators import COLUMN_SUM_TOL, ensure_column_stochastic, ensure_state


@dataclass(frozen=True, eq=False)
class ColumnStochasticMatrix:
    """d x d matrix with ``entries[j, k] = P(to state j+1 | from state k+1)``.

    Construction clamps round-off negatives and rejects columns that do not sum
    to one within 1e-12.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        arr = ensure_column_stochastic(self.entries)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @classmethod
    def identity(cls, d: int = 2) -> "ColumnStochasticMatrix":
        return cls(np.eye(d))

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def column(self, j: int) -> np.ndarray:
        """Column of the 1-based state ``j`` (the law conditioned on starting in ``j``)."""
        j = ensure_state(j, self.d)
        return self.entries[:, j - 1]

    def max_abs_diff(self, other: Union["ColumnStochasticMatrix", np.ndarray]) -> float:
        return float(np.max(np.abs(self.entries - np.asarray(other))))

    def __array__(self, dtype=None, copy=None) -> np.ndarray:
        return np.array(self.entries, dtype=dtype)

    def __getitem__(self, index):
        return self.entries[index]

    def __matmul__(self, other):
        if isinstance(other, ColumnStochasticMatrix):
            return ColumnStochasticMatrix(self.entries @ other.entries)
        return self.entries @ np.asarray(other, dtype=float)

    def __repr__(self) -> str:
        return f"ColumnStochasticMatrix({np.array2string(self.entries, precision=6)})"


@dataclass(frozen=True, eq=False)
class DiagonalWeights:
    """Posterior weights ``a[j] = P(X_t0 = x_l | X_s = x_j)`` for a fixed initial state ``l``."""

    l: int
    a: np.ndarray

    def as_matrix(self) -> np.ndarray:
        return np.diag(self.a)


@dataclass(frozen=True, eq=False)
class GeneratorSnapshot:
    """Time-local generator w(t, t0) * L of the marginal master equation."""

    w: float
    L: np.ndarray
    W12: float
    W21: float

    @property
    def matrix(self) -> np.ndarray:
        return self.w * self.L

    def is_conservative(self) -> bool:
        return bool(np.all(np.abs(self.matrix.sum(axis=0)) <= COLUMN_SUM_TOL))
