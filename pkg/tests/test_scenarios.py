"""Bundled scenarios, expectations, log partitioning and determinism."""

import hashlib
import json
import random
from pathlib import Path

import pytest

from statepin.crypto_core import ChainSecret, hamming_distance, hamming_weight
from statepin.scenario import (
    BUNDLED,
    ScenarioError,
    bundled_path,
    chain_partition,
    load_scenario,
    run_scenario,
)
from statepin.verify_log import pins_from_lines, reconstruct, verify_log

GOLDEN = Path(__file__).parent / "golden"
DIGESTS = json.loads((GOLDEN / "digests.json").read_text())


@pytest.fixture(scope="module")
def runs():
    return {name: run_scenario(load_scenario(name)) for name in BUNDLED}


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_expectations_pass(runs, name):
    _, report = runs[name]
    assert report.passed, report.to_text()


@pytest.mark.parametrize("name", BUNDLED)
def test_matches_golden_digest(runs, name):
    result, _ = runs[name]
    assert hashlib.sha256(result.log_text().encode()).hexdigest() == DIGESTS[name]["events_sha256"]
    assert hashlib.sha256(result.final_state_text().encode()).hexdigest() == DIGESTS[name]["state_sha256"]


def test_collusion_golden_log_byte_identical():
    golden = (GOLDEN / "collusion.events.jsonl").read_text()
    for _ in range(3):
        result, _ = run_scenario(load_scenario("collusion"))
        assert result.log_text() == golden
        assert result.final_state_text() == (GOLDEN / "collusion.state.json").read_text()


def test_report_is_deterministic():
    a = run_scenario(load_scenario("masked_unmask"))[1].to_json()
    b = run_scenario(load_scenario("masked_unmask"))[1].to_json()
    assert a == b


def test_vote_suppression_documents_the_limit(runs):
    result, report = runs["vote_suppression"]
    actions = [json.loads(l) for l in result.lines if '"action_votes"' in l]
    assert [(a["payload"]["yes"], a["payload"]["no"]) for a in actions] == [(1, 2)]


# -- loading errors ---------------------------------------------------------------

def raw(name):
    return json.loads(bundled_path(name).read_text())


def test_schema_rejects_unknown_field():
    d = raw("happy_path")
    d["chains"][0]["colour"] = "blue"
    with pytest.raises(ScenarioError):
        load_scenario(d)


def test_dangling_actor_chain():
    d = raw("happy_path")
    d["actors"][1]["chains"] = ["nowhere"]
    with pytest.raises(ScenarioError):
        load_scenario(d)


def test_dangling_expectation_chain():
    d = raw("happy_path")
    d["expectations"].append({"type": "partition_exact", "chain": "ghost"})
    with pytest.raises(ScenarioError):
        load_scenario(d)


def test_sidechain_voting_not_below_dispute():
    d = raw("happy_path")
    d["chains"][1]["voting"]["voting_period"] = 16
    with pytest.raises(ScenarioError):
        load_scenario(d)


def test_unreadable_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(bad)


def test_failing_expectation_is_reported():
    d = raw("happy_path")
    d["expectations"] = [{"type": "event_count", "event_type": "add_pin", "equals": 99}]
    _, report = run_scenario(load_scenario(d))
    assert not report.passed
    assert "observed 5" in report.expectations[0].detail


# -- partitioning a shared registry ---------------------------------------------------

def link_of(result, cid):
    return result.topology.links[cid]


def test_partition_recovers_exactly_each_chain(runs):
    result, _ = runs["rate_hiding"]
    for cid in ("chain_a", "chain_b"):
        part = chain_partition(result, cid)
        truth = {"0x" + k.hex() for k, c in result.ground_truth.items() if c == cid}
        assert len(truth) >= 100
        assert part.keys == truth
        assert not part.broken


def test_wrong_secrets_identify_nothing(runs):
    result, _ = runs["rate_hiding"]
    link = link_of(result, "chain_a")
    rng = random.Random(99)
    pins = pins_from_lines(result.lines)
    for _ in range(1000):
        part = reconstruct(pins, link.pbi, ChainSecret(rng.randbytes(32)))
        assert not part.entries


def test_empty_log_gives_empty_partition():
    part = verify_log([], b"\x01" * 32, ChainSecret(b"\x02" * 32))
    assert not part.entries and not part.broken


def drop_pin(lines, key):
    return [l for l in lines
            if not (json.loads(l)["event_type"] == "add_pin" and json.loads(l)["payload"]["key"] == key)]


def test_missing_contested_pin_is_reported_as_gap(runs):
    result, _ = runs["key_squatting"]
    link = link_of(result, "consortium")
    full = chain_partition(result, "consortium")
    squatted = full.contested[0]
    part = verify_log(drop_pin(result.lines, squatted.key), link.pbi, link.secret)
    assert part.broken
    assert part.gaps == [[squatted.index, squatted.index]]
    assert part.keys == full.keys - {squatted.key}


def test_missing_accepted_pin_truncates_the_walk(runs):
    result, _ = runs["happy_path"]
    link = link_of(result, "consortium")
    full = chain_partition(result, "consortium")
    part = verify_log(drop_pin(result.lines, full.entries[2].key), link.pbi, link.secret)
    # later keys hang off the missing pin's value, so the walk simply ends
    assert [e.index for e in part.entries] == [0, 1]


def key_stats(keys):
    keys = list(keys)
    return [hamming_weight(k) for k in keys]


def mean_pairwise(a, b, same):
    ds = [hamming_distance(x, y) for i, x in enumerate(a) for j, y in enumerate(b)
          if not same or i < j]
    return sum(ds) / len(ds)


def test_keys_carry_no_chain_marker(runs):
    result, _ = runs["rate_hiding"]
    a = [k for k, c in result.ground_truth.items() if c == "chain_a"]
    b = [k for k, c in result.ground_truth.items() if c == "chain_b"]
    assert len(a) + len(b) >= 500
    for keys in (a, b):
        weights = key_stats(keys)
        assert abs(sum(weights) / len(weights) - 128) <= 12
    within = (mean_pairwise(a, a, True) + mean_pairwise(b, b, True)) / 2
    cross = mean_pairwise(a, b, False)
    assert abs(cross - within) / within <= 0.05
