"""Gain sweeps: one scenario run per point of a Cartesian gain grid.

Sweep file (YAML)::

    scenario: velocity_steps      # bundled name or path
    grid:
      Kp_vel: [0.03, 0.06, 0.12]
      Kp_yaw: [15.0]
    workers: 1                    # > 1 runs rows in separate processes
    duration: 10.0                # optional override

Rows follow ``itertools.product`` over the grid keys in file order.  A row
whose run faults (or whose gains are invalid) is flagged and the rest of the
sweep carries on.
"""
from __future__ import annotations

import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from pathlib import Path

import numpy as np
import yaml

from .control import Gains
from .faults import ConfigError
from .runner import run_scenario
from .scenario import Scenario, load_scenario

SUMMARY_KEYS = (
    "velocity_rmse", "yaw_rate_rmse", "mean_reach_time", "max_reach_time",
    "x_gap_max", "x_gap_final", "min_clearance", "goal_reached",
)


def load_sweep(path) -> tuple[Scenario, dict, int]:
    raw = yaml.safe_load(Path(path).read_text())
    if not isinstance(raw, dict) or "scenario" not in raw or "grid" not in raw:
        raise ConfigError("sweep file needs 'scenario' and 'grid'", where=str(path))
    extra = set(raw) - {"scenario", "grid", "workers", "duration"}
    if extra:
        raise ConfigError(f"unknown key {sorted(extra)[0]!r}", where=str(path))
    base = raw["scenario"]
    cand = Path(path).parent / str(base)
    scn = load_scenario(cand if cand.exists() else base)
    if "duration" in raw:
        scn = replace(scn, duration=float(raw["duration"]))
    grid = raw["grid"]
    known = {f.name for f in fields(Gains)}
    if not isinstance(grid, dict) or not grid:
        raise ConfigError("grid must be a non-empty mapping of gain -> list", where=f"{path} (grid)")
    for k, v in grid.items():
        if k not in known:
            raise ConfigError(f"unknown gain {k!r}", where=f"{path} (grid.{k})")
        if not isinstance(v, list) or not v:
            raise ConfigError("expected a non-empty list", where=f"{path} (grid.{k})")
    return scn, grid, int(raw.get("workers", 1))


def grid_points(grid: dict) -> list[dict]:
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def summarize(metrics: dict) -> dict:
    reach = [s["reach"] for s in metrics.get("velocity_steps", [])]
    row = {k: metrics.get(k) for k in SUMMARY_KEYS if k in metrics}
    if reach:
        r = [np.inf if x is None else x for x in reach]
        row["mean_reach_time"] = float(np.mean(r))
        row["max_reach_time"] = float(np.max(r))
    return row


def run_row(scn: Scenario, point: dict) -> dict:
    row = dict(point)
    try:
        res = run_scenario(scn.with_gains(**point))
    except (ValueError, TypeError) as e:
        row.update(status="error", detail=str(e))
        return row
    row.update(summarize(res.metrics))
    if res.fault is not None:
        row.update(status="fault", detail=f"{res.fault['kind']} at t={res.fault['time']:.3f}s")
    else:
        row.update(status="ok", detail="")
    return row


def _row(args):
    return run_row(*args)


def sweep(scn: Scenario, grid: dict, workers: int = 1) -> list[dict]:
    jobs = [(scn, p) for p in grid_points(grid)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_row, jobs))
    return [_row(j) for j in jobs]


def write_table(rows: list[dict], path) -> None:
    cols = []
    for r in rows:
        cols += [k for k in r if k not in cols]
    with open(path, "w", newline="") as f:
        wr = csv.DictWriter(f, fieldnames=cols)
        wr.writeheader()
        for r in rows:
            wr.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in cols})
