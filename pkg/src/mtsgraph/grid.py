"""Resumable benchmark grid: every variant, every seed, content-hashed.

Each run is identified by the SHA-256 of its canonicalized config; the
run log directory holds one JSON record per hash.  Re-running a grid
reloads completed records instead of recomputing them, so a killed grid
resumes where it stopped.  Failed runs are recorded with their error and
never abort the sweep.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, RunError
from .models import ARCHITECTURES
from .training import DEFAULT_SEEDS, RunConfig, RunResult, train_run
from .ts_io import load_dataset_dir

log = logging.getLogger(__name__)

NODE_KIND_CHOICES = ("raw", "de", "psd")
EDGE_KIND_CHOICES = ("cg", "pcc", "mi", "ael")


@dataclass(frozen=True)
class GridSpec:
    datasets: tuple
    node_kinds: tuple = NODE_KIND_CHOICES
    edge_kinds: tuple = EDGE_KIND_CHOICES
    architectures: tuple = ARCHITECTURES
    seeds: tuple = DEFAULT_SEEDS


def run_hash(config: RunConfig) -> str:
    payload = json.dumps(config.canonical(), sort_keys=True,
                         separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def record_path(runs_dir, config: RunConfig) -> Path:
    return Path(runs_dir) / f"{run_hash(config)}.json"


def result_record(result: RunResult) -> dict:
    return {
        "status": "ok",
        "config": result.config.canonical(),
        "test_accuracy": result.test_accuracy,
        "train_accuracy": result.train_accuracy,
        "best_train_loss": result.best_train_loss,
        "selected_epoch": result.selected_epoch,
        "wall_seconds": result.wall_seconds,
        "loss_curve": result.loss_curve,
    }


def failure_record(config: RunConfig, error: Exception) -> dict:
    return {
        "status": "failed",
        "config": config.canonical(),
        "error": f"{type(error).__name__}: {error}",
    }


def write_record(runs_dir, config: RunConfig, record: dict) -> Path:
    path = record_path(runs_dir, config)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(record, indent=1, sort_keys=True))
    os.replace(tmp, path)
    return path


def load_record(path) -> dict | None:
    try:
        record = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError):
        return None
    if record.get("status") not in ("ok", "failed"):
        return None
    return record


def load_run_log(runs_dir) -> list[dict]:
    """All parseable records in a run directory, sorted by filename."""
    runs_dir = Path(runs_dir)
    if not runs_dir.is_dir():
        return []
    records = []
    for path in sorted(runs_dir.glob("*.json")):
        record = load_record(path)
        if record is not None:
            records.append(record)
    return records


def expand_grid(grid: GridSpec, sampling_rates: dict,
                overrides: dict | None = None) -> list[RunConfig]:
    """All runnable configs; frequency-domain variants are dropped with
    a notice for datasets with no known sampling rate."""
    overrides = overrides or {}
    configs = []
    for dataset in grid.datasets:
        fs = sampling_rates.get(dataset)
        for node_kind in grid.node_kinds:
            if node_kind in ("de", "psd") and fs is None:
                log.warning("skipping %s node features for %s: no "
                            "sampling frequency on record",
                            node_kind, dataset)
                continue
            for edge_kind in grid.edge_kinds:
                for architecture in grid.architectures:
                    for seed in grid.seeds:
                        configs.append(RunConfig(
                            dataset=dataset, node_kind=node_kind,
                            edge_kind=edge_kind,
                            architecture=architecture, seed=seed,
                            **overrides))
    return configs


def execute_run(config: RunConfig, data_root, sampling_rates: dict) -> dict:
    """Load the dataset, train, and return a JSON-ready record."""
    try:
        dataset = load_dataset_dir(
            data_root, config.dataset,
            sampling_frequency=sampling_rates.get(config.dataset),
            normalize=config.normalize)
        result = train_run(config, dataset)
    except (DataError, RunError) as exc:
        log.error("run %s failed: %s", run_hash(config)[:12], exc)
        return failure_record(config, exc)
    return result_record(result)


def _worker(args):
    config_dict, data_root, sampling_rates = args
    return execute_run(RunConfig(**config_dict), data_root, sampling_rates)


def run_grid(grid: GridSpec, data_root, runs_dir, sampling_rates: dict,
             *, resume: bool = True, workers: int = 1,
             overrides: dict | None = None) -> list[dict]:
    """Execute or reload every (variant, seed) in the grid.

    Returns the full list of records, completed and failed alike, in
    grid expansion order.
    """
    configs = expand_grid(grid, sampling_rates, overrides)
    records: dict[int, dict] = {}
    pending: list[tuple[int, RunConfig]] = []
    for i, config in enumerate(configs):
        existing = load_record(record_path(runs_dir, config)) \
            if resume else None
        if existing is not None:
            records[i] = existing
        else:
            pending.append((i, config))
    log.info("grid: %d runs total, %d reloaded, %d to execute",
             len(configs), len(records), len(pending))

    if workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            args = [(config.canonical(), data_root, sampling_rates)
                    for _, config in pending]
            for (i, config), record in zip(pending,
                                           pool.map(_worker, args)):
                write_record(runs_dir, config, record)
                records[i] = record
    else:
        for i, config in pending:
            record = execute_run(config, data_root, sampling_rates)
            write_record(runs_dir, config, record)
            records[i] = record
    return [records[i] for i in range(len(configs))]


def variant_key(record: dict) -> tuple:
    c = record["config"]
    return (c["dataset"], c["node_kind"], c["edge_kind"],
            c["architecture"])


def summarize(records: list[dict]) -> dict:
    """Best-of-seeds per variant, with mean and std across seeds.

    Selection order matches the run protocol: maximum test accuracy,
    ties to lower best train loss, then lower seed.  Failed seeds are
    recorded in the summary but excluded from selection.
    """
    groups: dict[tuple, list[dict]] = {}
    for record in records:
        groups.setdefault(variant_key(record), []).append(record)
    summaries = {}
    for key, group in groups.items():
        ok = [r for r in group if r["status"] == "ok"]
        failed = [r for r in group if r["status"] != "ok"]
        if not ok:
            summaries[key] = {"status": "failed", "n_failed": len(failed)}
            continue
        best = min(ok, key=lambda r: (-r["test_accuracy"],
                                      r["best_train_loss"],
                                      r["config"]["seed"]))
        accs = [r["test_accuracy"] for r in ok]
        summaries[key] = {
            "status": "ok",
            "best": best,
            "test_accuracy": best["test_accuracy"],
            "mean_accuracy": float(np.mean(accs)),
            "std_accuracy": float(np.std(accs)),
            "n_seeds": len(ok),
            "n_failed": len(failed),
        }
    return summaries
