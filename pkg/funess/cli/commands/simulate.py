"""Simulation drivers: trajectory ensembles and random-walk reports."""
from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from funess.cli.manifest import IoFailureError, ensure_output_dir, write_table
from funess.cli.schemas import RunConfig
from funess.features.params import WalkParams
from funess.montecarlo.io import write_ensemble_csv
from funess.montecarlo.trajectory import sample_ensemble
from funess.randomwalk.io import DIFFUSION_COLUMNS, MOMENT_COLUMNS, write_walk_csv
from funess.randomwalk.walk import (
    MIN_WALK_SAMPLES,
    correlated_diffusion,
    effective_diffusion,
    estimate_walk_moments,
    fit_variance_slope,
    sample_walk_ensemble,
    walk_moments_analytic,
)

logger = logging.getLogger(__name__)

ENSEMBLE_NAME = "ensemble.csv"


def cmd_simulate(config: RunConfig, workers: int = 1) -> List[Path]:
    out = ensure_output_dir(config.output_dir)
    ensemble = sample_ensemble(config.params, config.n_trajectories, config.horizon, config.seed, workers)
    try:
        return [write_ensemble_csv(ensemble, out / ENSEMBLE_NAME)]
    except OSError as exc:
        raise IoFailureError(f"io_failure:{out / ENSEMBLE_NAME}:{exc}") from exc


def _walk_grid(config: RunConfig) -> np.ndarray:
    settings = config.walk
    steps = int(round(settings.horizon / settings.grid_step))
    return config.params.t0 + np.linspace(0.0, steps * settings.grid_step, steps + 1)


def cmd_walk(config: RunConfig, workers: int = 1) -> List[Path]:
    """Sample walks for every q1 in the sweep; write paths, moment and diffusion reports."""

    settings = config.walk
    out = ensure_output_dir(config.output_dir)
    grid = _walk_grid(config)
    t0 = config.params.t0
    moment_rows: List[Dict[str, Any]] = []
    diffusion_rows: List[Dict[str, Any]] = []
    files: List[Path] = []

    for q1 in settings.q1_list:
        w = WalkParams(base=config.params.replace(x1=settings.x1, x2=settings.x2, q1=q1), lam=config.lam)
        ensemble = sample_walk_ensemble(
            w, config.n_trajectories, grid[-1] - t0, grid, config.seed, workers, settings.increments
        )
        if settings.write_paths:
            try:
                files.append(write_walk_csv(ensemble, out / f"walk_paths_q1_{q1:g}.csv"))
            except OSError as exc:
                raise IoFailureError(f"io_failure:{out}:{exc}") from exc

        # Monte Carlo columns stay empty below the sample size the estimator accepts.
        # var_analytic is the marginal-increment variance; trajectory-mode var_mc also
        # carries the increment correlations, hence the increments column.
        with_mc = ensemble.n >= MIN_WALK_SAMPLES
        for t in grid[1:]:
            analytic = walk_moments_analytic(t, w)
            row: Dict[str, Any] = {
                "t": t,
                "q1": q1,
                "increments": settings.increments,
                "mean_analytic": analytic.mean,
                "var_analytic": analytic.variance,
            }
            if with_mc:
                estimate = estimate_walk_moments(ensemble, t)
                row.update(
                    mean_mc=estimate.mean.value,
                    mean_stderr=estimate.mean.stderr,
                    var_mc=estimate.variance.value,
                    var_stderr=estimate.variance.stderr,
                )
            moment_rows.append(row)

        row = {
            "q1": q1,
            "increments": settings.increments,
            "d_eff": effective_diffusion(w),
            "d_eff_correlated": math.nan,
        }
        if settings.increments == "trajectory" and q1 in (0.0, 1.0):
            row["d_eff_correlated"] = correlated_diffusion(w, 1 if q1 == 1.0 else 2)
        if ensemble.n > 1:
            slope = fit_variance_slope(ensemble, t0 + settings.fit_window[0], t0 + settings.fit_window[1])
            row.update(slope_mc=slope.value, slope_stderr=slope.stderr)
        diffusion_rows.append(row)
        logger.info("Walk sweep q1=%g: d_eff=%.6g", q1, row["d_eff"])

    files.append(write_table(moment_rows, MOMENT_COLUMNS, out / "walk_moments.csv"))
    files.append(write_table(diffusion_rows, DIFFUSION_COLUMNS, out / "walk_diffusion.csv"))
    return files
