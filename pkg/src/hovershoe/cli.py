"""Command line: ``hovershoe run | sweep | validate``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .faults import ConfigError
from .runner import run_scenario
from .scenario import bundled_scenarios, load_scenario
from .sweep import load_sweep, sweep, write_table


def _run(a) -> int:
    scn = load_scenario(a.scenario)
    out = Path(a.out) if a.out else Path("runs") / scn.name
    res = run_scenario(scn, out, deterministic=a.deterministic, plot_data=a.plot_data, seed=a.seed)
    m = res.metrics
    print(f"{scn.name}: wrote {out}")
    for k in ("velocity_rmse", "yaw_rate_rmse", "x_gap_max", "min_clearance", "goal_reached"):
        if k in m:
            print(f"  {k} = {m[k]}")
    if res.fault is not None:
        print(f"  FAULT: {res.fault['kind']}: {res.fault['message']}", file=sys.stderr)
        return 2
    return 0


def _sweep(a) -> int:
    scn, grid, workers = load_sweep(a.spec)
    rows = sweep(scn, grid, a.workers or workers)
    out = Path(a.out) if a.out else Path(a.spec).with_suffix(".csv")
    write_table(rows, out)
    for r in rows:
        print(json.dumps(r))
    print(f"wrote {out}")
    return 0


def _validate(a) -> int:
    scn = load_scenario(a.scenario)
    print(f"{scn.source}: ok ({scn.mode}, {scn.duration} s, seed {scn.seed})")
    return 0


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="hovershoe", description="Two-platform rider simulator and planner.")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run a scenario file or bundled scenario name")
    r.add_argument("scenario", help=f"path or one of: {', '.join(bundled_scenarios())}")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", default=None, help="output directory (default runs/<name>)")
    r.add_argument("--deterministic", action="store_true", help="lockstep planner (bit-reproducible)")
    r.add_argument("--plot-data", action="store_true", help="also write decimated series and planner artefacts")
    r.set_defaults(fn=_run)

    s = sub.add_parser("sweep", help="run a gain grid over one scenario")
    s.add_argument("spec")
    s.add_argument("--out", default=None)
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(fn=_sweep)

    v = sub.add_parser("validate", help="parse and check a scenario without running it")
    v.add_argument("scenario")
    v.set_defaults(fn=_validate)

    a = p.parse_args(argv)
    try:
        return a.fn(a)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
