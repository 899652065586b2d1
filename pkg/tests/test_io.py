import os
import sys

ROOT = os.path.dirname(os.path.dirname(__file__))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_array_equal

from funess.features.params import FunessParams, WalkParams
from funess.features.validators import SchemaValidationError, ensure_required_columns
from funess.montecarlo.io import (
    ENSEMBLE_COLUMNS,
    EnsembleFormatError,
    ensemble_frame,
    read_ensemble_csv,
    write_ensemble_csv,
)
from funess.montecarlo.trajectory import sample_ensemble
from funess.randomwalk.io import WALK_COLUMNS, walk_frame, write_walk_csv
from funess.randomwalk.walk import sample_walk_ensemble

SEED = 11


def build_params(**changes):
    return FunessParams(k=0.75, r=0.5, alpha=2.0, x1=1.0, x2=-1.0, q1=0.6).replace(**changes)


def build_rows():
    return pd.DataFrame(
        [
            {"trajectory_id": 0, "jump_index": 0, "time": 0.0, "state": 1},
            {"trajectory_id": 0, "jump_index": 1, "time": 0.4, "state": 2},
            {"trajectory_id": 0, "jump_index": 2, "time": 1.1, "state": 1},
            {"trajectory_id": 1, "jump_index": 0, "time": 0.0, "state": 2},
        ]
    )


def test_ensemble_frame_layout():
    ensemble = sample_ensemble(build_params(), 20, 2.0, SEED)
    frame = ensemble_frame(ensemble)
    assert list(frame.columns) == list(ENSEMBLE_COLUMNS)
    assert len(frame) == ensemble.n + ensemble.jump_times.size
    origins = frame[frame["jump_index"] == 0]
    assert_array_equal(origins["trajectory_id"], np.arange(20))
    assert_array_equal(origins["state"], ensemble.initial_states)
    assert (origins["time"] == 0.0).all()


def test_ensemble_csv_round_trip(tmp_path):
    p = build_params()
    ensemble = sample_ensemble(p, 40, 2.0, SEED)
    path = write_ensemble_csv(ensemble, tmp_path / "ensemble.csv")
    loaded = read_ensemble_csv(path, p, 2.0, seed=SEED)
    assert_array_equal(loaded.initial_states, ensemble.initial_states)
    assert_array_equal(loaded.offsets, ensemble.offsets)
    assert_array_equal(loaded.jump_times, ensemble.jump_times)
    assert path.read_bytes() == write_ensemble_csv(loaded, tmp_path / "again.csv").read_bytes()


def test_read_ensemble_accepts_hand_written_rows(tmp_path):
    path = tmp_path / "rows.csv"
    build_rows().to_csv(path, index=False)
    loaded = read_ensemble_csv(path, build_params(), 2.0)
    assert loaded.n == 2
    assert_array_equal(loaded.jump_counts, [2, 0])
    assert_array_equal(loaded.initial_states, [1, 2])


@pytest.mark.parametrize(
    "column, row, value, message",
    [
        ("state", 1, 1, "state:repeated_without_jump"),
        ("state", 3, 3, "state:not_in_1_2"),
        ("time", 2, 0.3, "time:not_ascending"),
        ("time", 0, 0.1, "time:origin"),
        ("time", 2, 2.5, "time:beyond_horizon"),
        ("jump_index", 2, 5, "jump_index:not_consecutive_from_0"),
        ("trajectory_id", 3, 4, "trajectory_id:not_contiguous_from_0"),
    ],
)
def test_read_ensemble_rejects_malformed_rows(tmp_path, column, row, value, message):
    frame = build_rows()
    frame.loc[row, column] = value
    path = tmp_path / "bad.csv"
    frame.to_csv(path, index=False)
    with pytest.raises(EnsembleFormatError, match=message):
        read_ensemble_csv(path, build_params(), 2.0)


def test_read_ensemble_missing_columns(tmp_path):
    path = tmp_path / "short.csv"
    build_rows().drop(columns=["state"]).to_csv(path, index=False)
    with pytest.raises(EnsembleFormatError, match="missing_columns"):
        read_ensemble_csv(path, build_params(), 2.0)
    with pytest.raises(EnsembleFormatError):
        read_ensemble_csv(tmp_path / "absent.csv", build_params(), 2.0)


def test_required_columns_helper():
    with pytest.raises(SchemaValidationError) as exc:
        ensure_required_columns(pd.DataFrame(columns=["a"]), ["b", "a", "c"], "table")
    assert "missing_columns:table:b,c" in str(exc.value)


def test_walk_csv_layout(tmp_path):
    w = WalkParams(base=build_params(x2=0.0, q1=1.0), lam=1.0)
    grid = np.linspace(0.0, 2.0, 5)
    ensemble = sample_walk_ensemble(w, 6, 2.0, grid, SEED)
    frame = walk_frame(ensemble)
    assert list(frame.columns) == list(WALK_COLUMNS)
    assert len(frame) == 30
    path = write_walk_csv(ensemble, tmp_path / "walk.csv")
    loaded = pd.read_csv(path)
    assert_array_equal(loaded["S"].to_numpy().reshape(6, 5), ensemble.values)
    assert_array_equal(loaded["time"].iloc[:5], grid)
