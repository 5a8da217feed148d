"""Experiment registry, trial execution and per-column aggregation."""
from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .config import ScenarioConfig
from .metrics import MetricsTable
from .rng import stream

log = logging.getLogger("railsim6g")

Rows = list[dict[str, float]]
TrialFn = Callable[[ScenarioConfig, np.random.Generator, int], Rows]


class UnknownScenarioError(KeyError):
    pass


class TrialError(RuntimeError):
    """A trial raised; ``trial`` holds its index."""

    def __init__(self, scenario: str, trial: int, cause: BaseException):
        super().__init__(f"scenario {scenario!r} trial {trial}: {type(cause).__name__}: {cause}")
        self.trial = trial


@dataclass(frozen=True)
class Experiment:
    name: str
    keys: tuple[str, ...]           # columns identifying a row (kept, not aggregated)
    run_trial: TrialFn
    description: str = ""
    defaults: dict[str, Any] = field(default_factory=dict)


REGISTRY: dict[str, Experiment] = {}


def register(name: str, keys: tuple[str, ...], description: str = "",
             defaults: dict[str, Any] | None = None) -> Callable[[TrialFn], TrialFn]:
    def deco(fn: TrialFn) -> TrialFn:
        if name in REGISTRY:
            raise ValueError(f"scenario {name!r} registered twice")
        REGISTRY[name] = Experiment(name, keys, fn, description, dict(defaults or {}))
        return fn
    return deco


def _load_builtin() -> None:
    from .. import experiments  # noqa: F401  (registers on import)


def get_experiment(name: str) -> Experiment:
    _load_builtin()
    if name not in REGISTRY:
        raise UnknownScenarioError(f"unknown scenario {name!r}; known: {', '.join(sorted(REGISTRY))}")
    return REGISTRY[name]


def list_experiments() -> list[Experiment]:
    _load_builtin()
    return [REGISTRY[k] for k in sorted(REGISTRY)]


def build_id() -> str:
    """Content hash of the package sources (stable across runs of the same code)."""
    root = Path(__file__).resolve().parent.parent
    h = hashlib.sha1()
    for path in sorted(root.rglob("*.py")):
        h.update(path.relative_to(root).as_posix().encode())
        h.update(path.read_bytes())
    return h.hexdigest()[:12]


def aggregate(rows_per_trial: list[Rows], keys: tuple[str, ...]) -> MetricsTable:
    """Group rows by key columns (first-seen order); each metric becomes mean, std, min, max."""
    groups: dict[tuple, list[dict[str, float]]] = {}
    metrics: list[str] = []
    for rows in rows_per_trial:
        for row in rows:
            missing = [k for k in keys if k not in row]
            if missing:
                raise ValueError(f"row lacks key columns {missing}")
            groups.setdefault(tuple(row[k] for k in keys), []).append(row)
            for c in row:
                if c not in keys and c not in metrics:
                    metrics.append(c)
    columns = list(keys)
    for c in metrics:
        columns += [c, f"{c}_std", f"{c}_min", f"{c}_max"]
    table = MetricsTable({c: [] for c in columns})
    for key, rows in groups.items():
        out: dict[str, float] = dict(zip(keys, key))
        for c in metrics:
            vals = np.array([r[c] for r in rows if c in r], dtype=float)
            if len(vals) == 0 or not np.all(np.isfinite(vals)):
                raise ValueError(f"column {c!r} has missing or non-finite values")
            out[c] = float(np.mean(vals))
            out[f"{c}_std"] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            out[f"{c}_min"] = float(np.min(vals))
            out[f"{c}_max"] = float(np.max(vals))
        table.add_row(out)
    return table


def run_scenario(config: ScenarioConfig) -> MetricsTable:
    """Run every trial of ``config`` on its own stream and aggregate the rows."""
    exp = get_experiment(config.scenario_name)
    config = config.with_defaults(exp.defaults)
    started = time.perf_counter()
    results: list[Rows] = []
    for trial in range(config.trials):
        rng = stream(config.seed, config.scenario_name, "trial", trial)
        try:
            rows = exp.run_trial(config, rng, trial)
        except Exception as exc:  # attach the trial index, keep the cause
            raise TrialError(config.scenario_name, trial, exc) from exc
        log.debug("trial %d produced %d rows", trial, len(rows))
        results.append(rows)
    table = aggregate(results, exp.keys)
    table.metadata = {
        "scenario_name": config.scenario_name,
        "seed": config.seed,
        "trials": config.trials,
        "build": build_id(),
        "duration_s": round(time.perf_counter() - started, 6),
    }
    return table


