"""Recompute tracking RMSE from a trajectory CSV with nothing but the stdlib.

    python scripts/recompute_metrics.py runs/velocity_steps/trajectory.csv [--transient 2.0]

Prints a JSON object with velocity_rmse and yaw_rate_rmse.  A sample counts
once the reference has been constant for at least ``transient`` seconds.
"""
import argparse
import csv
import json
import math


def windowed_rmse(t, y, ref, transient):
    last_change = t[0]
    acc, n = 0.0, 0
    for k in range(len(t)):
        if k > 0 and ref[k] != ref[k - 1]:
            last_change = t[k]
        if t[k] - last_change >= transient - 1e-12:
            acc += (y[k] - ref[k]) ** 2
            n += 1
    return math.sqrt(acc / n) if n else None


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("--transient", type=float, default=2.0)
    a = ap.parse_args(argv)
    with open(a.csv, newline="") as f:
        rows = list(csv.DictReader(f))
    col = {k: [float(r[k]) for r in rows] for k in ("t", "v", "v_d", "psi_dot", "psi_dot_d")}
    out = {
        "velocity_rmse": windowed_rmse(col["t"], col["v"], col["v_d"], a.transient),
        "yaw_rate_rmse": windowed_rmse(col["t"], col["psi_dot"], col["psi_dot_d"], a.transient),
    }
    print(json.dumps(out))


if __name__ == "__main__":
    main()
