"""Run outputs: CSV tables and the manifest (full config, seed, version, sha256 per file)."""
from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping

import pandas as pd

from funess import __version__
from funess.cli.schemas import RunConfig
from funess.montecarlo.io import FLOAT_FORMAT

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
CHUNK = 1 << 16


class IoFailureError(RuntimeError):
    """Raised when an output directory or file cannot be written."""


def ensure_output_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailureError(f"io_failure:{path}:{exc}") from exc
    return path


def sha256sum(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(CHUNK), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(config: RunConfig, command: str, files: Iterable[Path]) -> Path:
    """Write manifest.json next to the outputs; reloading it as --config reproduces them."""

    out = ensure_output_dir(config.output_dir)
    checksums: Dict[str, str] = {path.name: sha256sum(path) for path in sorted(files)}
    document = {
        "command": command,
        "version": __version__,
        "seed": config.seed,
        "config": config.model_dump(mode="json", by_alias=True),
        "files": checksums,
    }
    path = out / MANIFEST_NAME
    try:
        path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailureError(f"io_failure:{path}:{exc}") from exc
    logger.info("Wrote %s (%d files)", path, len(checksums))
    return path


def write_table(rows: Iterable[Mapping[str, Any]], columns: Iterable[str], path: Path) -> Path:
    """Write report rows with a fixed column order; missing keys become empty cells."""

    frame = pd.DataFrame(list(rows), columns=list(columns))
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as exc:
        raise IoFailureError(f"io_failure:{path}:{exc}") from exc
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return path
