"""Ensemble CSV export and import: one row per (trajectory_id, jump_index, time, state)."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from funess.features.params import FunessParams
from funess.features.validators import SchemaValidationError, ensure_required_columns
from funess.montecarlo.trajectory import Ensemble

logger = logging.getLogger(__name__)

ENSEMBLE_COLUMNS = ("trajectory_id", "jump_index", "time", "state")
FLOAT_FORMAT = "%.17g"


class EnsembleFormatError(ValueError):
    """Raised when an ensemble CSV does not describe valid trajectories."""


def ensemble_frame(ensemble: Ensemble) -> pd.DataFrame:
    """Row 0 of each trajectory is its initial state at t0; later rows are jumps."""

    counts = ensemble.jump_counts
    rows_per = counts + 1
    ids = np.repeat(np.arange(ensemble.n), rows_per)
    starts = np.concatenate([[0], np.cumsum(rows_per)[:-1]])
    jump_index = np.arange(ids.size) - np.repeat(starts, rows_per)

    times = np.empty(ids.size)
    is_origin = jump_index == 0
    times[is_origin] = ensemble.t0
    times[~is_origin] = ensemble.jump_times
    initial = np.repeat(ensemble.initial_states, rows_per).astype(np.int64)
    states = np.where(jump_index % 2 == 0, initial, 3 - initial)
    return pd.DataFrame({"trajectory_id": ids, "jump_index": jump_index, "time": times, "state": states})


def write_ensemble_csv(ensemble: Ensemble, path: Union[str, Path]) -> Path:
    path = Path(path)
    frame = ensemble_frame(ensemble)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return path


def read_ensemble_csv(
    path: Union[str, Path], params: FunessParams, horizon: float, seed: Optional[int] = None
) -> Ensemble:
    """Load an ensemble written by :func:`write_ensemble_csv`, checking every path."""

    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise EnsembleFormatError(f"unreadable:{path}") from exc
    try:
        ensure_required_columns(frame, ENSEMBLE_COLUMNS, "ensemble")
    except SchemaValidationError as exc:
        raise EnsembleFormatError(str(exc)) from exc

    frame = frame.sort_values(["trajectory_id", "jump_index"], kind="stable").reset_index(drop=True)
    ids = frame["trajectory_id"].to_numpy()
    jump_index = frame["jump_index"].to_numpy()
    times = frame["time"].to_numpy(dtype=float)
    states = frame["state"].to_numpy()

    unique_ids, starts = np.unique(ids, return_index=True)
    if not np.array_equal(unique_ids, np.arange(unique_ids.size)):
        raise EnsembleFormatError("trajectory_id:not_contiguous_from_0")
    expected_index = np.arange(ids.size) - np.repeat(starts, np.diff(np.append(starts, ids.size)))
    if not np.array_equal(jump_index, expected_index):
        raise EnsembleFormatError("jump_index:not_consecutive_from_0")
    if not np.isin(states, (1, 2)).all():
        raise EnsembleFormatError("state:not_in_1_2")

    is_origin = jump_index == 0
    if not np.all(times[is_origin] == params.t0):
        raise EnsembleFormatError(f"time:origin!=t0={params.t0}")
    same_path = ids[1:] == ids[:-1]
    if np.any(same_path & (np.diff(times) <= 0)):
        raise EnsembleFormatError("time:not_ascending")
    if np.any(same_path & (states[1:] == states[:-1])):
        raise EnsembleFormatError("state:repeated_without_jump")
    if np.any(times > params.t0 + horizon):
        raise EnsembleFormatError(f"time:beyond_horizon={horizon}")

    counts = np.diff(np.append(starts, ids.size)) - 1
    return Ensemble(
        params=params,
        horizon=horizon,
        initial_states=states[is_origin].astype(np.int8),
        offsets=np.concatenate([[0], np.cumsum(counts)]).astype(np.int64),
        jump_times=times[~is_origin],
        seed=seed,
    )
