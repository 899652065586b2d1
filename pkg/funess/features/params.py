"""Parameter records for the Funessian process and its random walk."""
from __future__ import annotations

import logging
from typing import Any, Mapping

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from funess.features.validators import MemoryRegimeError, ensure_positive, ensure_probability

logger = logging.getLogger(__name__)

MARKOV_TOL = 1e-12


class FunessParams(BaseModel):
    """Full parameter record: weights k, r, relaxation rate alpha, values, q1 and t0."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    k: float = Field(ge=0.0, le=1.0)
    r: float = Field(ge=0.0, le=1.0)
    alpha: float = Field(gt=0.0, description="relaxation rate (1/time)")
    x1: float = 1.0
    x2: float = -1.0
    q1: float = Field(default=0.5, ge=0.0, le=1.0)
    t0: float = 0.0

    @model_validator(mode="after")
    def _check_memory_regime(self) -> "FunessParams":
        if self.k + self.r < 1.0 - MARKOV_TOL:
            raise ValueError(f"memory_regime:k+r={self.k + self.r:.12g}<1")
        return self

    @property
    def markov_flag(self) -> bool:
        return abs(self.k + self.r - 1.0) <= MARKOV_TOL

    @property
    def degenerate(self) -> bool:
        """True when x1 == x2, so every variance vanishes."""
        return self.x1 == self.x2

    @property
    def q2(self) -> float:
        return 1.0 - self.q1

    @property
    def q(self) -> np.ndarray:
        return np.array([self.q1, self.q2])

    @property
    def values(self) -> np.ndarray:
        return np.array([self.x1, self.x2])

    def replace(self, **changes: Any) -> "FunessParams":
        """Return a re-validated copy with ``changes`` applied."""
        return FunessParams(**{**self.model_dump(), **changes})


class WalkParams(BaseModel):
    """Random-walk parameters: the underlying process plus the Poisson jump rate."""

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    base: FunessParams
    lam: float = Field(alias="lambda", ge=0.0, description="Poisson jump rate (1/time)")


def validate_params(raw: Mapping[str, Any]) -> FunessParams:
    """Validate a raw parameter mapping, raising the named domain errors."""

    for label in ("k", "r", "q1"):
        if label in raw:
            ensure_probability(raw[label], label)
    k = float(raw.get("k", 1.0))
    r = float(raw.get("r", 1.0))
    if k + r < 1.0 - MARKOV_TOL:
        raise MemoryRegimeError(f"memory_regime:k+r={k + r:.12g}<1")
    if "alpha" in raw:
        ensure_positive(raw["alpha"], "alpha")

    params = FunessParams(**raw)
    if params.degenerate:
        logger.warning("x1 == x2 == %s: degenerate-statistics, all variances vanish", params.x1)
    return params
