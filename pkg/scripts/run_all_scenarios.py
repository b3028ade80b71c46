"""Run every bundled scenario and write logs, state and reports under one directory.

    python scripts/run_all_scenarios.py --out runs/
"""

import argparse
import hashlib
import json
import time
from pathlib import Path

from statepin.scenario import BUNDLED, load_scenario, run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()

    out = Path(args.out)
    summary = {}
    for name in BUNDLED:
        start = time.perf_counter()
        result, report = run_scenario(load_scenario(name), args.seed)
        elapsed = time.perf_counter() - start
        d = out / name
        d.mkdir(parents=True, exist_ok=True)
        (d / "events.jsonl").write_text(result.log_text())
        (d / "state.json").write_text(result.final_state_text())
        (d / "report.json").write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
        summary[name] = {
            "passed": report.passed,
            "seconds": round(elapsed, 3),
            "events": len(result.lines),
            "events_sha256": hashlib.sha256(result.log_text().encode()).hexdigest(),
            "finality": report.finality,
        }
        print(f"{name:18s} {'PASS' if report.passed else 'FAIL'}  {len(result.lines):6d} events  {elapsed:.2f} s")
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
