"""Metrics CSV and run-directory layout."""
from __future__ import annotations

import csv
import io
from pathlib import Path

from ..evolution import IterationRow, RunRecord

METRICS_COLUMNS = ("t", "lambda", "best_fitness", "mean_fitness", "mean_sigma", "accepts", "wallclock_ms")
SCHEMA_VERSION = 1

METRICS_FILE = "metrics.csv"
CHECKPOINT_FILE = "checkpoint.bin"
RUN_FILE = "run.json"
REPORT_SUFFIX = ".report.json"


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def metrics_line(row: IterationRow) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(
        [row.t, _fmt(row.lam), _fmt(row.best_fitness), _fmt(row.mean_fitness), _fmt(row.mean_sigma), row.accepts, _fmt(row.wallclock_ms)]
    )
    return buf.getvalue()


def write_metrics(path, record: RunRecord) -> None:
    """Rewrite the whole CSV from ``record`` (used on start and resume)."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(METRICS_COLUMNS) + "\n")
        for row in record.rows:
            fh.write(metrics_line(row))


def append_metrics(path, row: IterationRow) -> None:
    with open(path, "a", newline="") as fh:
        fh.write(metrics_line(row))


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != METRICS_COLUMNS:
            raise ValueError(f"{path}: unexpected metrics columns {reader.fieldnames}")
        return list(reader)


def run_paths(out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    return {"metrics": out / METRICS_FILE, "checkpoint": out / CHECKPOINT_FILE, "run": out / RUN_FILE}
