"""Worst-case finality as a function of pinning period, model against simulation.

For each pinning period the closed form is evaluated for a MainNet-like
management chain, and a single-chain scenario is simulated to measure the
oldest block's wait until a covering pin is past its dispute period.

    python scripts/finality_sweep.py --periods 10 20 40 80 240 --csv sweep.csv
"""

import argparse
import csv
import json
import sys

from statepin.finality import LayerParams, hierarchy_finality_seconds
from statepin.scenario import bundled_path, load_scenario, run_scenario


def simulate(period: int) -> float:
    d = json.loads(bundled_path("happy_path").read_text())
    d["name"] = f"sweep_{period}"
    d["chains"][1]["pinning_period"] = period
    d["duration"] = period * 5 + 20
    d["expectations"] = []
    _, report = run_scenario(load_scenario(d))
    return report.finality["consortium"]["simulated_worst_s"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--periods", type=int, nargs="+", default=[1, 5, 10, 20, 60, 120, 240])
    ap.add_argument("--csv", help="also write rows to this file")
    args = ap.parse_args()

    rows = []
    for p in args.periods:
        model = hierarchy_finality_seconds([LayerParams.mainnet(pinning_period=p)])
        rows.append({"pinning_period_blocks": p, "model_s": model, "simulated_s": simulate(p)})
    w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]))
    w.writeheader()
    w.writerows(rows)
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
