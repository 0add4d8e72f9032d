"""Run configuration: one JSON document plus ``CPATH_`` environment overrides.

Every default is filled in before a command runs, and the filled-in document
is copied into each report so a run can be reproduced from its output alone.

Overrides use ``__`` to descend into sections, e.g.
``CPATH_PIPELINE__BETA=5`` or ``CPATH_LEARNING__RETRAIN__MAX_ITERATIONS=2``.
Values are parsed as JSON when possible and taken as strings otherwise.
"""

from __future__ import annotations

import copy
import json
import os
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError

ENV_PREFIX = "CPATH_"
FIXTURES = "fixtures"
U64_MAX = 2**64 - 1

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "workers": 1,
    "corpus": {
        "seeds": "fixtures:seeds",
        "donor": "fixtures:benign_donor",
        "clean": "fixtures:clean",
    },
    "oracle": {
        "kind": "rule",
        "rules": FIXTURES,
        "cache": None,
        "strict": True,
        "program": None,
        "timeout": 60.0,
        "max_parallel": 1,
    },
    "pipeline": {
        "depth_limit": 10,
        "beta": 3,
        "rules_path": None,
        "count_defs_path": None,
        "feature_kind": "SL2013",
    },
    "learning": {
        "dataset": {"kind": "toy", "n_malicious": 200, "n_benign": 200},
        "conserved": FIXTURES,
        "model": {"penalty": "l2", "C": 1.0, "epochs": 300, "eta0": 0.5, "schedule": "invsqrt", "batch_size": None},
        "attacks": [
            {"name": "cg", "kind": "CoordinateGreedy", "lam": 0.005, "max_sweeps": 1000, "restarts": 8, "frozen": []},
            {"name": "cg_frozen", "kind": "CoordinateGreedy", "lam": 0.005, "max_sweeps": 1000, "restarts": 8,
             "frozen": "conserved"},
            {"name": "sp", "kind": "SaltPepper", "epsilon": 1000, "max_draws": 100, "frozen": []},
        ],
        "retrain": {"max_iterations": 5, "seeds_per_iteration": 50, "stop_when_no_new": True},
        "l1_grid": [0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
    },
}


def _merge(base: dict[str, Any], override: Mapping[str, Any], where: str) -> dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where}{key}")
        if isinstance(base[key], dict) and key != "dataset":
            if not isinstance(value, Mapping):
                raise ConfigError(f"{where}{key} must be an object")
            out[key] = _merge(base[key], value, f"{where}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _env_value(text: str) -> Any:
    try:
        return json.loads(text)
    except ValueError:
        return text


def env_overrides(environ: Mapping[str, str]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for name in sorted(environ):
        if not name.startswith(ENV_PREFIX) or name == ENV_PREFIX:
            continue
        keys = [k.lower() for k in name[len(ENV_PREFIX):].split("__")]
        node = out
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"conflicting environment overrides at {name}")
        node[keys[-1]] = _env_value(environ[name])
    return out


def _resolve_keys(override: dict[str, Any], base: dict[str, Any]) -> dict[str, Any]:
    """Map lower-cased env keys back onto the config's spelling (e.g. ``c`` -> ``C``)."""
    out = {}
    for key, value in override.items():
        match = next((k for k in base if k.lower() == key), key)
        if isinstance(value, dict) and isinstance(base.get(match), dict):
            value = _resolve_keys(value, base[match])
        out[match] = value
    return out


def load_config(
    path: str | Path | None = None,
    seed: int | None = None,
    environ: Mapping[str, str] | None = None,
) -> tuple[dict[str, Any], Path]:
    """Return the complete config and the directory relative paths resolve against."""
    base_dir = Path.cwd()
    user: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            user = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except ValueError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        base_dir = path.resolve().parent
    cfg = _merge(DEFAULTS, user, "")
    env = env_overrides(os.environ if environ is None else environ)
    cfg = _merge(cfg, _resolve_keys(env, cfg), "")
    if seed is not None:
        cfg["seed"] = seed
    validate(cfg)
    return cfg, base_dir


def _positive(value: Any, name: str, integer: bool = False) -> None:
    kind = int if integer else (int, float)
    if isinstance(value, bool) or not isinstance(value, kind) or value <= 0:
        raise ConfigError(f"{name} must be a positive {'integer' if integer else 'number'}")


def validate(cfg: dict[str, Any]) -> None:
    seed = cfg["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= U64_MAX:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    _positive(cfg["workers"], "workers", integer=True)
    pipe = cfg["pipeline"]
    _positive(pipe["depth_limit"], "pipeline.depth_limit", integer=True)
    try:
        if Fraction(pipe["beta"]) <= 0:
            raise ValueError
    except (ValueError, TypeError, ZeroDivisionError):
        raise ConfigError("pipeline.beta must be a positive number") from None
    if pipe["feature_kind"] not in ("SL2013", "Hidost", "PdfRateB"):
        raise ConfigError("pipeline.feature_kind must be SL2013, Hidost or PdfRateB")
    oracle = cfg["oracle"]
    if oracle["kind"] not in ("rule", "cached", "command"):
        raise ConfigError("oracle.kind must be rule, cached or command")
    if oracle["kind"] == "command" and not oracle["program"]:
        raise ConfigError("oracle.program is required for a command oracle")
    if oracle["kind"] == "cached" and not oracle["cache"]:
        raise ConfigError("oracle.cache is required for a cached oracle")
    _positive(oracle["timeout"], "oracle.timeout")
    _positive(oracle["max_parallel"], "oracle.max_parallel", integer=True)
    learn = cfg["learning"]
    model = learn["model"]
    if model["penalty"] not in ("l1", "l2"):
        raise ConfigError("learning.model.penalty must be l1 or l2")
    _positive(model["C"], "learning.model.C")
    _positive(model["epochs"], "learning.model.epochs", integer=True)
    names = [a.get("name") for a in learn["attacks"]]
    if len(set(names)) != len(names) or not all(isinstance(n, str) and n for n in names):
        raise ConfigError("every learning.attacks entry needs a distinct non-empty name")
    for a in learn["attacks"]:
        if a.get("kind") not in ("CoordinateGreedy", "SaltPepper"):
            raise ConfigError(f"attack {a.get('name')!r}: kind must be CoordinateGreedy or SaltPepper")
    rt = learn["retrain"]
    if isinstance(rt["max_iterations"], bool) or not isinstance(rt["max_iterations"], int) or rt["max_iterations"] < 0:
        raise ConfigError("learning.retrain.max_iterations must be a non-negative integer")
    _positive(rt["seeds_per_iteration"], "learning.retrain.seeds_per_iteration", integer=True)
    grid = learn["l1_grid"]
    if not grid or any(not isinstance(c, (int, float)) or c <= 0 for c in grid) or sorted(grid) != list(grid):
        raise ConfigError("learning.l1_grid must be a non-empty ascending list of positive numbers")
    if learn["dataset"].get("kind") not in ("toy", "vectors"):
        raise ConfigError("learning.dataset.kind must be toy or vectors")


def resolve_path(value: str, base_dir: Path) -> Path:
    path = Path(value)
    return path if path.is_absolute() else base_dir / path
