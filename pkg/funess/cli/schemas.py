"""Run configuration: JSON document plus command-line overrides."""
from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from funess.features.params import FunessParams
from funess.features.validators import ensure_simplex

logger = logging.getLogger(__name__)

THREADS_ENV = "FUNESS_THREADS"


class ConfigError(ValueError):
    """Raised when the run configuration cannot be read or validated."""


def _default_params() -> FunessParams:
    return FunessParams(k=0.75, r=0.5, alpha=2.0, x1=1.0, x2=-1.0, q1=0.6)


class WalkSettings(BaseModel):
    """Walk-specific settings; values default to x = (1, 0) so D_eff depends on q."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    x1: float = 1.0
    x2: float = 0.0
    q1_list: List[float] = Field(default_factory=lambda: [1.0, 0.0])
    horizon: float = Field(default=10.0, gt=0.0)
    grid_step: float = Field(default=0.5, gt=0.0)
    fit_window: Tuple[float, float] = (5.0, 10.0)
    increments: Literal["trajectory", "marginal"] = "trajectory"
    write_paths: bool = True

    @field_validator("q1_list")
    @classmethod
    def _check_q1(cls, values: List[float]) -> List[float]:
        for q1 in values:
            if not 0.0 <= q1 <= 1.0:
                raise ValueError(f"out_of_range:q1={q1}:[0,1]")
        return values

    @model_validator(mode="after")
    def _check_window(self) -> "WalkSettings":
        lo, hi = self.fit_window
        if not 0.0 <= lo < hi <= self.horizon:
            raise ValueError(f"out_of_range:fit_window={self.fit_window}:within_horizon={self.horizon}")
        return self


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    params: FunessParams = Field(default_factory=_default_params)
    lam: float = Field(default=1.0, alias="lambda", ge=0.0)
    tau_grid: List[float] = Field(default_factory=lambda: [round(0.1 * i, 10) for i in range(31)])
    q_list: List[List[float]] = Field(default_factory=lambda: [[0.2, 0.8], [0.5, 0.5], [0.8, 0.2]])
    seed: int = Field(default=20240601, ge=0, lt=2**64)
    n_trajectories: int = Field(default=20_000, ge=1)
    horizon: float = Field(default=10.0, gt=0.0)
    output_dir: Path = Path("out")
    markov_reference: bool = True
    markov_k_list: List[float] = Field(default_factory=lambda: [0.2, 0.5, 0.8])
    markov_q1: float = Field(default=0.6, ge=0.0, le=1.0)
    walk: WalkSettings = Field(default_factory=WalkSettings)
    quick: bool = False
    inject_fault: bool = False
    threads: Optional[int] = Field(default=None, ge=1)

    @field_validator("tau_grid")
    @classmethod
    def _check_tau_grid(cls, values: List[float]) -> List[float]:
        if not values:
            raise ValueError("out_of_range:tau_grid:empty")
        if values[0] < 0 or any(b < a for a, b in zip(values, values[1:])):
            raise ValueError("out_of_range:tau_grid:non_negative_ascending")
        return values

    @field_validator("q_list")
    @classmethod
    def _check_q_list(cls, values: List[List[float]]) -> List[List[float]]:
        for q in values:
            if len(q) != 2:
                raise ValueError(f"out_of_range:q={q}:two_states")
            ensure_simplex(q, "q")
        return values

    @field_validator("markov_k_list")
    @classmethod
    def _check_markov_k(cls, values: List[float]) -> List[float]:
        for k in values:
            if not 0.0 <= k <= 1.0:
                raise ValueError(f"out_of_range:k={k}:[0,1]")
        return values


def _read_document(path: Path) -> Dict[str, Any]:
    try:
        with path.open("r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config_unreadable:{path}:{exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config_not_object:{path}")
    # a manifest carries the config it was produced from
    if "config" in data and "files" in data:
        data = data["config"]
    return data


def load_config(path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    data = _read_document(Path(path)) if path is not None else {}
    data.update({key: value for key, value in (overrides or {}).items() if value is not None})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def resolve_threads(config: RunConfig) -> int:
    """Worker count from FUNESS_THREADS, else the config, else 1."""

    raw = os.environ.get(THREADS_ENV)
    if raw is None or not raw.strip():
        return config.threads or 1
    try:
        threads = int(raw)
    except ValueError:
        threads = 0
    if threads < 1:
        logger.warning("%s=%r is not a positive integer; using 1 thread", THREADS_ENV, raw)
        return 1
    return threads
