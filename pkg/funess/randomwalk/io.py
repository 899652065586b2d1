"""Walk CSV export: one row per (trajectory_id, time, S)."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from funess.montecarlo.io import FLOAT_FORMAT
from funess.randomwalk.walk import WalkEnsemble

logger = logging.getLogger(__name__)

WALK_COLUMNS = ("trajectory_id", "time", "S")
MOMENT_COLUMNS = (
    "t",
    "q1",
    "increments",
    "mean_analytic",
    "mean_mc",
    "mean_stderr",
    "var_analytic",
    "var_mc",
    "var_stderr",
)
DIFFUSION_COLUMNS = ("q1", "increments", "d_eff", "slope_mc", "slope_stderr", "d_eff_correlated")


def walk_frame(ensemble: WalkEnsemble) -> pd.DataFrame:
    n, m = ensemble.values.shape
    return pd.DataFrame(
        {
            "trajectory_id": np.repeat(np.arange(n), m),
            "time": np.tile(ensemble.grid, n),
            "S": ensemble.values.ravel(),
        },
        columns=list(WALK_COLUMNS),
    )


def write_walk_csv(ensemble: WalkEnsemble, path: Union[str, Path]) -> Path:
    path = Path(path)
    frame = walk_frame(ensemble)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return path
