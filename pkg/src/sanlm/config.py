"""Run configuration: JSON file, SANLM_* environment overrides, CLI flags.

Precedence (lowest to highest): built-in defaults, config file,
environment variables, command-line flags. Unknown keys are rejected,
and every command echoes its fully-resolved configuration into the
output directory for provenance.
"""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

from .errors import DataError, ParameterError

ENV_PREFIX = "SANLM_"

DEFAULTS: dict = {
    "seed": 0,
    "threads": 1,
    "model": {
        "mode": "bidirectional",
        "num_layers": 3,
        "model_dim": 512,
        "num_heads": 8,
        "ffn_dim": 2048,
        "max_len": 128,
        "dropout_p": 0.1,
        "dtype": "float64",
    },
    "train": {
        "learning_rate": 1e-4,
        "beta1": 0.9,
        "beta2": 0.999,
        "batch_size": 32,
        "max_steps": 100,
        "eval_interval": 50,
        "heldout_fraction": 0.05,
        "checkpoint_interval": None,
    },
    "rescore": {
        "lambda": 0.0,
        "alpha": None,
        "grid": [round(0.05 * i, 2) for i in range(21)],
    },
}

# Environment variables understood as overrides of scalar keys.
ENV_KEYS = {
    "SEED": ("seed", int),
    "THREADS": ("threads", int),
    "LAMBDA": (("rescore", "lambda"), float),
    "ALPHA": (("rescore", "alpha"), float),
}


def _check_keys(given: dict, allowed: dict, path: str = ""):
    for key, value in given.items():
        if key not in allowed:
            raise DataError(f"unknown configuration key: {path}{key}")
        if isinstance(allowed[key], dict):
            if not isinstance(value, dict):
                raise DataError(f"configuration key {path}{key} must be a table")
            _check_keys(value, allowed[key], f"{path}{key}.")


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _set_path(config: dict, key_path, value):
    if isinstance(key_path, str):
        config[key_path] = value
        return
    node = config
    for key in key_path[:-1]:
        node = node[key]
    node[key_path[-1]] = value


def load_config_file(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise DataError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise DataError("config file must hold a JSON object")
    _check_keys(data, DEFAULTS)
    return data


def resolve_config(config_path=None, flag_overrides: dict | None = None,
                   environ=None) -> dict:
    """Merge defaults <- file <- environment <- flags (flags win)."""
    environ = os.environ if environ is None else environ
    resolved = copy.deepcopy(DEFAULTS)
    if config_path is not None:
        resolved = _deep_merge(resolved, load_config_file(config_path))
    for env_key, (key_path, cast) in ENV_KEYS.items():
        raw = environ.get(ENV_PREFIX + env_key)
        if raw is not None:
            try:
                _set_path(resolved, key_path, cast(raw))
            except ValueError as exc:
                raise ParameterError(
                    f"bad value for {ENV_PREFIX}{env_key}: {raw!r}") from exc
    if flag_overrides:
        _check_keys(flag_overrides, DEFAULTS)
        resolved = _deep_merge(resolved, flag_overrides)
    return resolved


def write_resolved_config(config: dict, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.resolved.json").write_text(
        json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")
