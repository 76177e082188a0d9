"""Benchmark configuration: JSON file, environment, CLI flag merging.

Precedence, lowest to highest: built-in defaults, config file, the
MTSGRAPH_DATA_ROOT environment variable, explicit CLI flags.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .errors import DataError

ENV_DATA_ROOT = "MTSGRAPH_DATA_ROOT"

# Bundled sampling rates (Hz) for the archive datasets that record one,
# from the dataset donors' documentation.  Frequency-domain node
# features are only available for these unless a config file supplies a
# rate for another dataset.
DEFAULT_SAMPLING_RATES = {
    "ArticularyWordRecognition": 200.0,
    "AtrialFibrillation": 128.0,
    "BasicMotions": 10.0,
    "Cricket": 184.0,
    "Epilepsy": 16.0,
    "FaceDetection": 250.0,
    "FingerMovements": 100.0,
    "MotorImagery": 1000.0,
    "RacketSports": 10.0,
    "SelfRegulationSCP1": 256.0,
    "SelfRegulationSCP2": 256.0,
    "StandWalkJump": 500.0,
    "UWaveGestureLibrary": 100.0,
}

FS_DATASETS = tuple(sorted(DEFAULT_SAMPLING_RATES))

_SCHEMA_KEYS = {"data_root", "runs_dir", "workers", "sampling_rates",
                "grid", "training", "normalize"}
_GRID_KEYS = {"datasets", "node_kinds", "edge_kinds", "architectures",
              "seeds"}


def default_settings() -> dict:
    return {
        "data_root": ".",
        "runs_dir": "runs",
        "workers": 1,
        "sampling_rates": dict(DEFAULT_SAMPLING_RATES),
        "grid": {},
        "training": {},
        "normalize": True,
    }


def load_config_file(path) -> dict:
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise DataError(f"config file {path} is not valid JSON: "
                        f"{exc}") from exc
    if not isinstance(data, dict):
        raise DataError(f"config file {path} must hold a JSON object")
    unknown = set(data) - _SCHEMA_KEYS
    if unknown:
        raise DataError(f"config file {path} has unknown keys: "
                        f"{sorted(unknown)}")
    grid = data.get("grid", {})
    if not isinstance(grid, dict) or set(grid) - _GRID_KEYS:
        raise DataError(f"config file {path}: grid must be an object "
                        f"with keys from {sorted(_GRID_KEYS)}")
    return data


def resolve_settings(config_path=None, env=None, **flags) -> dict:
    """Merge defaults, file, environment, and flags; flags win."""
    env = os.environ if env is None else env
    settings = default_settings()
    if config_path is not None:
        file_data = load_config_file(config_path)
        rates = file_data.pop("sampling_rates", None)
        if rates is not None:
            settings["sampling_rates"].update(
                {k: float(v) for k, v in rates.items()})
        for key in ("grid", "training"):
            section = file_data.pop(key, None)
            if section is not None:
                settings[key].update(section)
        settings.update(file_data)
    if env.get(ENV_DATA_ROOT):
        settings["data_root"] = env[ENV_DATA_ROOT]
    for key, value in flags.items():
        if value is None:
            continue
        if key in _GRID_KEYS:
            settings["grid"][key] = value
        elif key == "sampling_rate_overrides":
            settings["sampling_rates"].update(value)
        elif key in _SCHEMA_KEYS:
            settings[key] = value
        else:
            settings["training"][key] = value
    return settings
