"""Run every bundled scenario and print a one-line summary per run.

    python scripts/run_all_scenarios.py [--out runs] [--plot-data]
"""
import argparse
import time
from pathlib import Path

from hovershoe.runner import run_scenario
from hovershoe.scenario import bundled_scenarios, load_scenario

KEYS = ("velocity_rmse", "yaw_rate_rmse", "x_gap_final", "curvature", "wave_amplitude_error",
        "min_clearance", "min_foot_clearance", "goal_time")


def fmt(v):
    return f"{v:.4g}" if isinstance(v, float) else str(v)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs")
    ap.add_argument("--plot-data", action="store_true")
    a = ap.parse_args()
    for name in bundled_scenarios():
        t0 = time.perf_counter()
        res = run_scenario(load_scenario(name), Path(a.out) / name, plot_data=a.plot_data)
        wall = time.perf_counter() - t0
        m = res.metrics
        parts = [f"{k}={fmt(m[k])}" for k in KEYS if m.get(k) is not None]
        status = "ok" if res.fault is None else f"FAULT {res.fault['kind']} at {res.fault['time']:.3f}s"
        print(f"{name:18s} {status:8s} {wall:5.1f}s  " + "  ".join(parts))


if __name__ == "__main__":
    main()
