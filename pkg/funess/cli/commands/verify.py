"""Verification command: run the suite and write verify_report.csv."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Tuple

from funess.cli.manifest import IoFailureError, ensure_output_dir
from funess.cli.schemas import RunConfig
from funess.montecarlo.io import FLOAT_FORMAT
from funess.services.verification import VerificationReport, VerificationService

logger = logging.getLogger(__name__)

REPORT_NAME = "verify_report.csv"


def cmd_verify(config: RunConfig, workers: int = 1) -> Tuple[VerificationReport, Path]:
    service = VerificationService(
        config.params,
        lam=config.lam,
        seed=config.seed,
        n_trajectories=config.n_trajectories,
        workers=workers,
        quick=config.quick,
        inject_fault=config.inject_fault,
    )
    report = service.run()
    path = ensure_output_dir(config.output_dir) / REPORT_NAME
    try:
        report.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as exc:
        raise IoFailureError(f"io_failure:{path}:{exc}") from exc
    logger.info("Wrote %s", path)
    return report, path
