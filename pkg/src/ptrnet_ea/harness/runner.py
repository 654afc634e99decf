"""Experiment operations behind the CLI verbs."""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .. import tsp
from ..evolution import NcsTrainer, TrainResult
from ..exceptions import CheckpointError, ConfigError, DatasetFormatError, ReportError
from ..portfolio import Portfolio, evaluate_portfolio
from ..ptrnet import decode_coordinates
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, config_digest
from .records import (
    REPORT_SUFFIX,
    SCHEMA_VERSION,
    append_metrics,
    read_metrics,
    run_paths,
    write_metrics,
)

log = logging.getLogger(__name__)

PRESETS = {"tsp20": 20, "tsp100": 100, "tsp500": 500, "tsp1000": 1000}
SCALES = {
    "desk": {"train": tsp.DESK_TRAIN_COUNT, "test": tsp.DESK_TEST_COUNT},
    "full": {"train": tsp.FULL_TRAIN_COUNT, "test": tsp.FULL_TEST_COUNT},
}


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(path, payload) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"
    tmp = Path(f"{path}.tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def dataset_ref(path) -> dict:
    return {"path": str(path), "sha256": file_sha256(path)}


# -- gen -------------------------------------------------------------------------------


def generate(n: int, count: int, seed: int, split: str, out) -> Path:
    ds = tsp.generate_dataset(n, count, seed, split)
    out = Path(out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    tsp.write_dataset(ds, out)
    return out


# -- train -----------------------------------------------------------------------------


def _run_metadata(cfg: RunConfig, trainer: NcsTrainer, train_ref, test_ref, n_train) -> dict:
    state = trainer.state
    rows = state.record.rows
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "run",
        "tag": cfg.tag,
        "seed": cfg.seed,
        "net_config": asdict(cfg.net_config),
        "ncs_config": asdict(cfg.ncs_config),
        "config_digest": config_digest(cfg.net_config, cfg.ncs_config),
        "train": train_ref,
        "test": test_ref,
        "train_n": n_train,
        "iterations": state.t,
        "complete": trainer.done,
        "budget_exhausted": state.record.budget_exhausted,
        "initial_best_fitness": min(state.record.initial_fitness),
        "final_best_fitness": state.best_fitness,
        "final_mean_sigma": rows[-1].mean_sigma if rows else cfg.ncs_config.sigma_init,
    }


def run_training(cfg: RunConfig, *, resume: bool = False, stop_after: Optional[int] = None) -> TrainResult:
    """Train per ``cfg``, writing metrics, checkpoints and run metadata under ``cfg.out_dir``.

    ``stop_after`` caps the number of iterations executed by this call; the
    run can be continued later with ``resume=True``.
    """
    if cfg.train_path is None:
        raise ConfigError("run config needs a 'train' dataset path")
    train = tsp.read_dataset(cfg.train_path)
    test_ref = None
    if cfg.test_path is not None:
        test = tsp.read_dataset(cfg.test_path)
        if test.n != train.n:
            raise DatasetFormatError(f"train n={train.n} and test n={test.n} differ")
        test_ref = dataset_ref(cfg.test_path)
    train_ref = dataset_ref(cfg.train_path)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = run_paths(out)
    trainer = NcsTrainer(
        cfg.ncs_config,
        cfg.net_config,
        train.coordinates(),
        cfg.seed,
        n_jobs=cfg.threads,
        record_wallclock=cfg.record_wallclock,
    )

    if resume and paths["checkpoint"].exists():
        ck = load_checkpoint(paths["checkpoint"])
        if ck["header"]["config_digest"] != config_digest(cfg.net_config, cfg.ncs_config):
            raise CheckpointError("checkpoint was written for a different configuration; cannot resume")
        if ck["seed"] != cfg.seed:
            raise CheckpointError(f"checkpoint seed {ck['seed']} differs from configured seed {cfg.seed}")
        trainer.resume(ck["state"])
        log.info("resumed %s at iteration %d", out, ck["state"].t)
    else:
        trainer.initialize()
    write_metrics(paths["metrics"], trainer.state.record)

    def checkpoint():
        save_checkpoint(paths["checkpoint"], trainer.state, cfg.net_config, cfg.ncs_config, cfg.seed)
        _dump_json(paths["run"], _run_metadata(cfg, trainer, train_ref, test_ref, train.n))

    def on_iteration(state, row):
        append_metrics(paths["metrics"], row)
        if state.t % cfg.checkpoint_every == 0:
            checkpoint()

    try:
        result = trainer.run(on_iteration=on_iteration, max_steps=stop_after)
    finally:
        trainer.close()
    checkpoint()
    return result


# -- eval / baseline -----------------------------------------------------------------


def _lengths_summary(lengths: np.ndarray) -> dict:
    return {"mean": float(lengths.mean()), "std": float(lengths.std()), "count": int(lengths.size)}


def evaluate_checkpoint(checkpoint_path, dataset_path, mode: str = "best", out=None) -> dict:
    if mode not in ("best", "portfolio"):
        raise ConfigError(f"mode must be 'best' or 'portfolio', got {mode!r}")
    ck = load_checkpoint(checkpoint_path)
    state, net = ck["state"], ck["net_config"]
    data = tsp.read_dataset(dataset_path)
    coords = data.coordinates()
    best_lengths = tsp.tour_lengths(coords, decode_coordinates(coords, state.best_params, net))
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "eval",
        "method": "ptrnet-ea",
        "mode": mode,
        "checkpoint": {"path": str(checkpoint_path), "sha256": file_sha256(checkpoint_path), "iteration": state.t},
        "dataset": dataset_ref(dataset_path),
        "train_n": None,
        "test_n": data.n,
        "best_ever": _lengths_summary(best_lengths),
    }
    run_file = Path(checkpoint_path).with_name("run.json")
    if run_file.exists():
        report["train_n"] = json.loads(run_file.read_text()).get("train_n")
    if mode == "portfolio":
        pr = evaluate_portfolio(Portfolio(tuple(s.individual for s in state.population), net), coords)
        report.update(_lengths_summary(pr.lengths))
        report["portfolio"] = pr.to_dict()
    else:
        report.update(_lengths_summary(best_lengths))
    if out is not None:
        _dump_json(out, report)
    return report


def run_baseline(dataset_path, method: str, out=None, *, start: int = 0, max_passes: int = 1000) -> dict:
    from ..estimator import BASELINE_METHODS

    if method not in BASELINE_METHODS:
        raise ConfigError(f"method must be one of {BASELINE_METHODS}, got {method!r}")
    data = tsp.read_dataset(dataset_path)
    if method == "oracle" and data.n > tsp.BRUTE_FORCE_MAX_N:
        raise ConfigError(f"oracle refused: n={data.n} exceeds {tsp.BRUTE_FORCE_MAX_N}")
    lengths = []
    for inst in data.instances:
        if method == "oracle":
            tour = tsp.brute_force_optimal(inst)
        else:
            tour = tsp.nearest_neighbor_tour(inst, start)
            if method == "two_opt":
                tour = tsp.two_opt(inst, tour, max_passes)
        lengths.append(tsp.tour_length(inst, tour))
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "baseline",
        "method": method,
        "mode": None,
        "dataset": dataset_ref(dataset_path),
        "train_n": None,
        "test_n": data.n,
        **_lengths_summary(np.asarray(lengths)),
    }
    if out is not None:
        _dump_json(out, report)
    return report


# -- report --------------------------------------------------------------------------------

TABLE_COLUMNS = (
    "source",
    "kind",
    "tag",
    "method",
    "mode",
    "population_size",
    "sigma_rule",
    "normalize_acceptance",
    "iterations",
    "test_n",
    "mean",
    "std",
    "final_best_fitness",
    "final_mean_sigma",
)


def _collect(directory: Path):
    artifacts = []
    run_file = directory / "run.json"
    if run_file.exists():
        artifacts.append((run_file, json.loads(run_file.read_text())))
    for path in sorted(directory.glob(f"*{REPORT_SUFFIX}")):
        artifacts.append((path, json.loads(path.read_text())))
    return artifacts


def consolidate(directories: Sequence, out_dir) -> dict:
    """Build ``table.csv`` and ``curves.json`` from run directories."""
    import csv

    if not directories:
        raise ReportError("report needs at least one run directory")
    found = []
    for d in directories:
        d = Path(d)
        if not d.is_dir():
            raise ReportError(f"not a directory: {d}")
        arts = _collect(d)
        if not arts:
            raise ReportError(f"no run.json or *{REPORT_SUFFIX} in {d}")
        found.extend((d, p, a) for p, a in arts)
    versions = {a.get("schema_version") for _, _, a in found}
    if versions != {SCHEMA_VERSION}:
        offenders = [str(p) for _, p, a in found if a.get("schema_version") != SCHEMA_VERSION]
        raise ReportError(f"schema version mismatch (expected {SCHEMA_VERSION}): {', '.join(offenders)}")

    rows, curves = [], {}
    for d, path, art in found:
        row = {k: "" for k in TABLE_COLUMNS}
        row["source"] = str(path)
        row["kind"] = art["kind"]
        if art["kind"] == "run":
            ncs = art["ncs_config"]
            row.update(
                tag=art["tag"],
                method="ptrnet-ea",
                population_size=ncs["population_size"],
                sigma_rule=ncs["sigma_rule"],
                normalize_acceptance=ncs["normalize_acceptance"],
                iterations=art["iterations"],
                final_best_fitness=art["final_best_fitness"],
                final_mean_sigma=art["final_mean_sigma"],
            )
            metrics = read_metrics(d / "metrics.csv")
            key = art["tag"] if art["tag"] not in curves else str(d)
            curves[key] = {
                "source": str(d),
                "population_size": ncs["population_size"],
                "sigma_rule": ncs["sigma_rule"],
                "t": [int(m["t"]) for m in metrics],
                "best_fitness": [float(m["best_fitness"]) for m in metrics],
                "mean_fitness": [float(m["mean_fitness"]) for m in metrics],
                "mean_sigma": [float(m["mean_sigma"]) for m in metrics],
            }
        else:
            row.update(
                method=art["method"],
                mode=art.get("mode") or "",
                test_n=art["test_n"],
                mean=art["mean"],
                std=art["std"],
            )
        rows.append(row)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "table.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    _dump_json(out / "curves.json", curves)
    return {"rows": rows, "curves": curves}
