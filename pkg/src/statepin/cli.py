"""``statepin`` command line: run scenarios, compute finality, verify logs."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from statepin.crypto_core import ChainSecret, from_hex
from statepin.finality import FinalityError, LayerParams, hierarchy_finality
from statepin.scenario import BUNDLED, ScenarioError, load_scenario, run_scenario
from statepin.verify_log import verify_log

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

LAYER_FIELDS = ("observe_depth", "unmask_blocks", "voting_period", "action_blocks",
                "block_period", "pinning_period")


def _emit(text_or_obj, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(text_or_obj, indent=2, sort_keys=True))
    else:
        print(text_or_obj)


def cmd_run(args) -> int:
    try:
        spec = load_scenario(args.scenario)
    except ScenarioError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    result, report = run_scenario(spec, args.seed)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "events.jsonl").write_text(result.log_text())
        (out / "state.json").write_text(result.final_state_text())
        (out / "report.json").write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    _emit(report.to_json() if args.format == "json" else report.to_text(), args.format)
    if not report.passed:
        failed = [e.description for e in report.expectations if not e.passed]
        print(f"expectations failed: {failed}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _parse_layer(text: str) -> LayerParams:
    """``preset[:k=v,...]`` or ``k=v,...`` with every field given."""
    if ":" in text or text in ("mainnet", "ibft"):
        preset, _, rest = text.partition(":")
    else:
        preset, rest = "", text
    overrides = {}
    for item in filter(None, rest.split(",")):
        k, sep, v = item.partition("=")
        if not sep or k not in LAYER_FIELDS + ("mode", "name"):
            raise FinalityError(f"bad layer field {item!r}")
        overrides[k] = v if k in ("mode", "name") else int(v)
    if preset == "mainnet":
        base = LayerParams.mainnet()
    elif preset == "ibft":
        base = LayerParams.ibft()
    elif preset:
        raise FinalityError(f"unknown preset {preset!r}")
    else:
        missing = [f for f in LAYER_FIELDS[:5] if f not in overrides]
        if missing:
            raise FinalityError(f"layer missing {missing}")
        return LayerParams(**overrides)
    fields = {f: getattr(base, f) for f in LAYER_FIELDS + ("mode", "name")}
    fields.update(overrides)
    return LayerParams(**fields)


def cmd_finality(args) -> int:
    try:
        if args.scenario:
            spec = load_scenario(args.scenario)
            topo = spec.build()[0]
            leaves = [c for c in topo.links if c not in topo.managers]
            if not leaves:
                raise FinalityError("scenario has no pinning chain")
            layers = topo.layer_params(args.chain or leaves[0])
        else:
            specs = list(args.layer or [])
            if args.preset:
                specs.insert(0, f"{args.preset}:pinning_period={args.pinning_period}")
            layers = [_parse_layer(s) for s in specs]
        report = hierarchy_finality(layers)
    except (FinalityError, ScenarioError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    _emit(report.to_json() if args.format == "json" else report.to_text(), args.format)
    return EXIT_OK


def cmd_verify_log(args) -> int:
    try:
        pbi = from_hex(args.pbi, 32)
        secret = ChainSecret.from_hex(args.secret)
        lines = Path(args.log).read_text().splitlines()
        part = verify_log(lines, pbi, secret)
    except (OSError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    _emit(part.to_json() if args.format == "json" else part.to_text(), args.format)
    if part.broken:
        print(f"key chain broken: gaps at {part.gaps}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="statepin", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and check its expectations")
    run.add_argument("--scenario", required=True,
                     help=f"path or bundled name ({', '.join(BUNDLED)})")
    run.add_argument("--out", help="directory for events.jsonl, state.json, report.json")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--format", choices=("text", "json"), default="text")
    run.set_defaults(func=cmd_run)

    fin = sub.add_parser("finality", help="closed-form worst-case finality")
    fin.add_argument("--preset", choices=("mainnet", "ibft"))
    fin.add_argument("--pinning-period", type=int, default=0,
                     help="pinning period for --preset, in management blocks")
    fin.add_argument("--layer", action="append",
                     help="layer as preset[:k=v,...] or k=v,...; repeat bottom to top")
    fin.add_argument("--scenario", help="derive layers from a scenario topology")
    fin.add_argument("--chain", help="leaf chain within --scenario")
    fin.add_argument("--format", choices=("text", "json"), default="text")
    fin.set_defaults(func=cmd_finality)

    ver = sub.add_parser("verify-log", help="pick one chain's pins out of an event log")
    ver.add_argument("--log", required=True)
    ver.add_argument("--pbi", required=True)
    ver.add_argument("--secret", required=True)
    ver.add_argument("--format", choices=("text", "json"), default="text")
    ver.set_defaults(func=cmd_verify_log)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
