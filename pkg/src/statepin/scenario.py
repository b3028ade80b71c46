"""Declarative scenario files: topology, actors, adversary script, expectations."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema

from statepin.chain_sim import (
    ChainNode,
    ConfigError,
    ManagementChain,
    ParticipantActor,
    PinLink,
    PinSchedule,
    SimulationResult,
    Topology,
    run_simulation,
)
from statepin.crypto_core import ChainSecret, derive_map_key, from_hex, prf_value, to_hex
from statepin.finality import hierarchy_finality
from statepin.registry import PinRegistry, RegistryConfig, RegistryError, VotingConfig
from statepin.verify_log import pins_from_lines, reconstruct

HEX32 = {"type": "string", "pattern": "^0x[0-9a-f]{64}$"}
HEX20 = {"type": "string", "pattern": "^0x[0-9a-f]{40}$"}
VOTING = {
    "type": "object",
    "properties": {
        "algorithm": {"type": "string"},
        "voting_period": {"type": "integer", "minimum": 1},
    },
    "required": ["voting_period"],
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "required": ["name", "chains", "duration"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "seed": {"type": "integer"},
        "duration": {"type": "integer", "minimum": 0},
        "chains": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string"},
                    "block_period": {"type": "integer", "minimum": 1},
                    "ticks_per_block": {"type": "integer", "minimum": 1},
                    "finality": {"enum": ["probabilistic", "instant"]},
                    "confirm_depth": {"type": "integer", "minimum": 0},
                    "registry": {
                        "type": "object",
                        "required": ["admins", "pin_dispute_period"],
                        "additionalProperties": False,
                        "properties": {
                            "voting": VOTING,
                            "pin_dispute_period": {"type": "integer", "minimum": 1},
                            "admins": {"type": "array", "minItems": 1, "items": HEX20},
                        },
                    },
                    "pins_to": {"type": "string"},
                    "pinning_period": {"type": "integer", "minimum": 1},
                    "pbi": HEX32,
                    "secret": HEX32,
                    "voting": VOTING,
                },
                "dependentRequired": {"pins_to": ["pinning_period", "pbi", "secret"]},
            },
        },
        "actors": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["account", "role"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "account": HEX20,
                    "role": {"enum": ["member", "masked_member", "quiet_guardian"]},
                    "chains": {"type": "array", "items": {"type": "string"}},
                    "guards": {"type": "array", "items": {"type": "string"}},
                    "salts": {"type": "object", "additionalProperties": HEX32},
                    "adversarial": {"type": "boolean"},
                },
            },
        },
        "script": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["tick", "type", "chain", "actor"],
                "additionalProperties": False,
                "properties": {
                    "tick": {"type": "integer", "minimum": 1},
                    "type": {"enum": ["false_pin", "squat"]},
                    "chain": {"type": "string"},
                    "actor": HEX20,
                    "revert_to": {"type": "integer", "minimum": 0},
                },
            },
        },
        "expectations": {
            "type": "array",
            "items": {"type": "object", "required": ["type"]},
        },
    },
}

EXPECTATION_TYPES = ("event_count", "pin_state", "rollover", "partition_exact",
                     "unmask_before_propose", "contest_outcome", "finality_agreement")


class ScenarioError(ValueError):
    """Malformed scenario file (schema or reference error)."""


@dataclass
class ScenarioSpec:
    name: str
    raw: dict
    seed: int
    duration: int
    expectations: list

    def build(self):
        """Fresh (topology, actors, script); every call returns new objects."""
        return _build(self.raw)


@dataclass
class ExpectationResult:
    description: str
    passed: bool
    detail: str = ""


@dataclass
class RunReport:
    scenario: str
    seed: int
    passed: bool
    expectations: list = field(default_factory=list)
    event_counts: dict = field(default_factory=dict)
    op_counts: dict = field(default_factory=dict)
    finality: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        out = [f"scenario {self.scenario} (seed {self.seed}): {'PASS' if self.passed else 'FAIL'}"]
        for e in self.expectations:
            out.append(f"  [{'pass' if e.passed else 'FAIL'}] {e.description}"
                       + (f" ({e.detail})" if e.detail else ""))
        out.append("event counts:")
        out.extend(f"  {k}: {v}" for k, v in sorted(self.event_counts.items()))
        out.append("registry operation counts:")
        out.extend(f"  {k}: {v}" for k, v in self.op_counts.items())
        if self.finality:
            out.append("finality (seconds):")
            for cid, fig in self.finality.items():
                out.append(f"  {cid}: model worst {fig['model_worst_s']}, model best "
                           f"{fig['model_best_s']}, simulated worst {fig['simulated_worst_s']}")
        return "\n".join(out)


BUNDLED = ("happy_path", "collusion", "masked_unmask", "rate_hiding", "hierarchy",
           "key_squatting", "vote_suppression")


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("statepin") / "scenarios" / f"{name}.json"))


def load_scenario(source) -> ScenarioSpec:
    """Load from a path, a bundled scenario name, or an already-parsed dict."""
    if isinstance(source, dict):
        raw = source
    else:
        path = Path(source)
        if not path.exists() and str(source) in BUNDLED:
            path = bundled_path(str(source))
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ScenarioError(f"cannot read scenario {source}: {err}") from err
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as err:
        raise ScenarioError(f"schema error at {list(err.absolute_path)}: {err.message}") from err
    _check_references(raw)
    try:
        _build(raw)[0].validate()
    except (ConfigError, RegistryError, ValueError) as err:
        raise ScenarioError(str(err)) from err
    return ScenarioSpec(raw["name"], raw, raw.get("seed", 0), raw["duration"],
                        raw.get("expectations", []))


def _check_references(raw: dict) -> None:
    chain_ids = [c["id"] for c in raw["chains"]]
    if len(set(chain_ids)) != len(chain_ids):
        raise ScenarioError("duplicate chain ids")
    pinned = {c["id"] for c in raw["chains"] if "pins_to" in c}
    for c in raw["chains"]:
        if "pins_to" in c and c["pins_to"] not in chain_ids:
            raise ScenarioError(f"chain {c['id']!r} pins to unknown chain {c['pins_to']!r}")
    for a in raw.get("actors", []):
        for cid in a.get("chains", []) + a.get("guards", []):
            if cid not in pinned:
                raise ScenarioError(f"actor {a.get('name', a['account'])} references "
                                    f"unknown or unpinned chain {cid!r}")
    for ev in raw.get("script", []):
        if ev["chain"] not in pinned:
            raise ScenarioError(f"script event references unknown chain {ev['chain']!r}")
    for exp in raw.get("expectations", []):
        if exp["type"] not in EXPECTATION_TYPES:
            raise ScenarioError(f"unknown expectation type {exp['type']!r}")
        if "chain" in exp and exp["chain"] not in pinned:
            raise ScenarioError(f"expectation references unknown chain {exp['chain']!r}")


def _build(raw: dict):
    topo = Topology()
    for c in raw["chains"]:
        chain = ChainNode(c["id"], c.get("block_period", 15), c.get("ticks_per_block", 1),
                          c.get("finality", "probabilistic"), c.get("confirm_depth", 6))
        topo.add_chain(chain)
        if "registry" in c:
            r = c["registry"]
            voting = _voting(r.get("voting", {"voting_period": 7}))
            admins = [from_hex(a, 20) for a in r["admins"]]
            registry = PinRegistry.deploy(RegistryConfig(voting, r["pin_dispute_period"]), admins)
            topo.add_manager(ManagementChain(chain, registry, admins))
    for c in raw["chains"]:
        if "pins_to" in c:
            topo.add_link(PinLink(c["id"], c["pins_to"], PinSchedule(c["pinning_period"]),
                                  from_hex(c["pbi"], 32), ChainSecret.from_hex(c["secret"]),
                                  _voting(c.get("voting", {"voting_period": 7}))))
    actors = []
    for a in raw.get("actors", []):
        role = a["role"]
        actors.append(ParticipantActor(
            account=from_hex(a["account"], 20),
            role=role,
            secret_access=role != "quiet_guardian",
            name=a.get("name", ""),
            chains=tuple(a.get("chains", [])),
            salts={k: from_hex(v, 32) for k, v in a.get("salts", {}).items()},
            guards=tuple(a.get("guards", [])),
            adversarial=a.get("adversarial", False),
        ))
    return topo, actors, list(raw.get("script", []))


def _voting(data: dict) -> VotingConfig:
    return VotingConfig(data.get("algorithm", "majority"), data["voting_period"])


def run_scenario(spec: ScenarioSpec, seed: Optional[int] = None):
    """Run a scenario; returns ``(SimulationResult, RunReport)``."""
    seed = spec.seed if seed is None else seed
    topo, actors, script = spec.build()
    result = run_simulation(topo, actors, script, spec.duration, seed)
    checks = [evaluate(exp, spec, result) for exp in spec.expectations]
    report = RunReport(
        scenario=spec.name,
        seed=seed,
        passed=all(c.passed for c in checks),
        expectations=checks,
        event_counts=dict(sorted(result.event_counts().items())),
        op_counts=result.op_counts(),
        finality=finality_figures(result),
    )
    return result, report


def finality_figures(result: SimulationResult) -> dict:
    topo = result.topology
    out = {}
    leaves = [cid for cid in topo.links if cid not in topo.managers]
    for cid in leaves:
        try:
            model = hierarchy_finality(topo.layer_params(cid))
        except ValueError:
            continue
        sim = result.worst_case_finality_seconds(cid)
        out[cid] = {"model_worst_s": model.worst_case_seconds,
                    "model_best_s": model.best_case_seconds,
                    "simulated_worst_s": sim,
                    "layers": len(model.layers),
                    "slack_s": sum(l.block_period for l in topo.layer_params(cid))}
    return out


def chain_partition(result: SimulationResult, chain_id: str):
    link = result.topology.links[chain_id]
    return reconstruct(pins_from_lines(result.lines), link.pbi, link.secret)


def evaluate(exp: dict, spec: ScenarioSpec, result: SimulationResult) -> ExpectationResult:
    kind = exp["type"]
    handler = _EVALUATORS[kind]
    try:
        return handler(exp, result)
    except (KeyError, IndexError) as err:
        return ExpectationResult(_describe(exp), False, f"missing entity: {err}")


def _describe(exp: dict) -> str:
    parts = [exp["type"]] + [f"{k}={v}" for k, v in exp.items() if k != "type"]
    return " ".join(parts)


def _ev_count(exp, result) -> ExpectationResult:
    n = result.event_counts().get(exp["event_type"], 0)
    ok = True
    if "equals" in exp:
        ok &= n == exp["equals"]
    if "min" in exp:
        ok &= n >= exp["min"]
    if "max" in exp:
        ok &= n <= exp["max"]
    return ExpectationResult(_describe(exp), ok, f"observed {n}")


def _pin_state(exp, result) -> ExpectationResult:
    part = chain_partition(result, exp["chain"])
    entry = next((e for e in part.entries if e.index == exp["index"]), None)
    if entry is None:
        return ExpectationResult(_describe(exp), False, "no pin at that index")
    link = result.topology.links[exp["chain"]]
    reg = result.topology.managers[link.mgmt_id].registry
    key = from_hex(entry.key)
    state = exp["state"]
    if state == "contested":
        ok = reg.state.pins[key].contested
    elif state == "final":
        ok = reg.is_pin_final(key)
    elif state == "uncontested":
        ok = not reg.state.pins[key].contested
    else:
        ok = True
    return ExpectationResult(_describe(exp), ok, f"key {entry.key} status {entry.status}")


def _rollover(exp, result) -> ExpectationResult:
    link = result.topology.links[exp["chain"]]
    reg = result.topology.managers[link.mgmt_id].registry
    part = chain_partition(result, exp["chain"])
    t = exp["index"]
    by_index = {e.index: e for e in part.entries}
    if t not in by_index or by_index[t].status != "contested":
        return ExpectationResult(_describe(exp), False, f"index {t} not contested")
    prev = [e for e in part.entries if e.index < t and e.status == "accepted"]
    prev_pin = from_hex(prev[-1].pin) if prev else bytes(32)
    expected = derive_map_key(link.pbi, prev_pin, prf_value(link.secret, t + 1))
    entry = reg.state.pins.get(expected)
    ok = entry is not None and not entry.contested
    return ExpectationResult(_describe(exp), ok, f"replacement key {to_hex(expected)}")


def _partition_exact(exp, result) -> ExpectationResult:
    cid = exp["chain"]
    part = chain_partition(result, cid)
    truth = {to_hex(k) for k, c in result.ground_truth.items() if c == cid}
    ok = part.keys == truth and not part.broken
    return ExpectationResult(_describe(exp), ok,
                             f"recovered {len(part.keys)} of {len(truth)}, "
                             f"{len(part.keys - truth)} foreign")


def _unmask_before_propose(exp, result) -> ExpectationResult:
    link = result.topology.links[exp["chain"]]
    pbi = to_hex(link.pbi)
    events = [json.loads(l) for l in result.lines]
    unmasks = {e["caller"]: e["height"] for e in events
               if e["event_type"] == "unmask" and e["payload"]["pbi"] == pbi}
    gaps = []
    for e in events:
        if e["caller"] in unmasks and e["payload"].get("pbi") == pbi and \
                e["event_type"] in ("propose_vote", "tx_rejected", "vote"):
            if e["event_type"] == "tx_rejected" and e["payload"]["op"] != "propose_vote":
                continue
            gaps.append(e["height"] - unmasks[e["caller"]])
    # rejected proposals carry no pbi; fall back to the caller's next action after unmasking
    if not gaps:
        for e in events:
            if e["caller"] in unmasks and e["event_type"] in ("tx_rejected", "propose_vote") \
                    and e["height"] > unmasks[e["caller"]]:
                gaps.append(e["height"] - unmasks[e["caller"]])
                break
    want = exp.get("gap", 1)
    ok = bool(unmasks) and bool(gaps) and gaps[0] == want
    return ExpectationResult(_describe(exp), ok, f"unmasked {len(unmasks)}, gaps {gaps[:3]}")


def _contest_outcome(exp, result) -> ExpectationResult:
    link = result.topology.links[exp["chain"]]
    pbi = to_hex(link.pbi)
    outcomes = [json.loads(l)["payload"]["outcome"] for l in result.lines
                if '"action_votes"' in l and json.loads(l)["payload"]["pbi"] == pbi
                and json.loads(l)["payload"]["action"]["kind"] == "contest_pin"]
    ok = exp["outcome"] in outcomes
    return ExpectationResult(_describe(exp), ok, f"outcomes {outcomes}")


def _finality_agreement(exp, result) -> ExpectationResult:
    figs = finality_figures(result)[exp["chain"]]
    sim = figs["simulated_worst_s"]
    ok = sim is not None and abs(sim - figs["model_worst_s"]) <= figs["slack_s"]
    return ExpectationResult(_describe(exp), ok,
                             f"simulated {sim} s vs model {figs['model_worst_s']} s, "
                             f"slack {figs['slack_s']} s")


_EVALUATORS = {
    "event_count": _ev_count,
    "pin_state": _pin_state,
    "rollover": _rollover,
    "partition_exact": _partition_exact,
    "unmask_before_propose": _unmask_before_propose,
    "contest_outcome": _contest_outcome,
    "finality_agreement": _finality_agreement,
}
