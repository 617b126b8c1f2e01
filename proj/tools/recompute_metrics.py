#!/usr/bin/env python3
"""Run one episode through the CLI and recompute its metrics from trajectory.csv.

usage: recompute_metrics.py <respire-binary> <scenario.json> <out-dir>

Exits 0 when the recomputed steps, steps_to_find, t_tra, t_los, r_los and
eps_est equal the reported values exactly and a second run with the same seed
produces a byte-identical metrics file.
"""

import csv
import math
import subprocess
import sys
from pathlib import Path


def run(cli, scenario, out):
    subprocess.run([cli, "--out", str(out), "run", scenario, "--no-reference"], check=True)
    return (out / "metrics.csv").read_bytes()


def recompute(rows):
    found = None
    t_tra = t_los = 0
    err_sum = 0.0
    for r in rows:
        detection = r["measurement"] == "detection"
        if found is None and detection:
            found = int(r["step"])
        if r["stage"] == "tracking":
            t_tra += 1
            if not detection:
                t_los += 1
            dx = float(r["estimate_x"]) - float(r["target_x"])
            dy = float(r["estimate_y"]) - float(r["target_y"])
            err_sum += math.sqrt(dx * dx + dy * dy)
    out = {
        "steps": str(len(rows)),
        "steps_to_find": "inf" if found is None else str(found),
        "t_tra": str(t_tra),
        "t_los": str(t_los),
        "r_los": "",
        "eps_est": "",
    }
    if t_tra > 0:
        out["r_los"] = "%.17g" % (t_los / t_tra)
        out["eps_est"] = "%.17g" % (err_sum / t_tra)
    return out


def main():
    if len(sys.argv) != 4:
        print(__doc__, file=sys.stderr)
        return 2
    cli, scenario, out = sys.argv[1], sys.argv[2], Path(sys.argv[3])
    first = run(cli, scenario, out / "a")
    second = run(cli, scenario, out / "b")
    failures = []
    if first != second:
        failures.append("metrics.csv differs between two runs with the same seed")

    with open(out / "a" / "metrics.csv", newline="") as f:
        reported = next(csv.DictReader(f))
    with open(out / "a" / "trajectory.csv", newline="") as f:
        rows = list(csv.DictReader(f))

    for key, value in recompute(rows).items():
        if reported[key] != value:
            failures.append(f"{key}: reported {reported[key]!r}, recomputed {value!r}")

    for r in rows:
        want = "10" if r["stage"] == "search" else "5"
        if r["horizon"] != want:
            failures.append(f"step {r['step']}: horizon {r['horizon']} in stage {r['stage']}")
            break

    for msg in failures:
        print("MISMATCH " + msg)
    if failures:
        return 1
    print(f"metrics match: r_los={reported['r_los']} eps_est={reported['eps_est']} t_tra={reported['t_tra']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
