"""The ``statepin`` command line."""

import json

import pytest

from statepin.cli import main
from statepin.scenario import bundled_path


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_run_happy_path(capsys, tmp_path):
    code, out, err = run(capsys, "run", "--scenario", "happy_path", "--out", str(tmp_path))
    assert code == 0
    events = (tmp_path / "events.jsonl").read_text().splitlines()
    assert sum(json.loads(l)["event_type"] == "add_pin" for l in events) == 5
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["passed"] and report["op_counts"]["add_pin"] == 5
    assert json.loads((tmp_path / "state.json").read_text())


def test_run_collusion_json(capsys):
    code, out, err = run(capsys, "run", "--scenario", "collusion", "--format", "json")
    assert code == 0
    report = json.loads(out)
    contested = [e for e in report["expectations"] if e["description"].startswith("pin_state")]
    assert contested and contested[0]["passed"]


def test_run_by_path(capsys):
    code, _, _ = run(capsys, "run", "--scenario", str(bundled_path("key_squatting")))
    assert code == 0


def test_malformed_file_exits_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"name": "x", "chains": [], "duration": 1}))
    code, out, err = run(capsys, "run", "--scenario", str(bad))
    assert code == 2 and "error" in err


def test_failed_expectation_exits_1(capsys, tmp_path):
    d = json.loads(bundled_path("happy_path").read_text())
    d["expectations"] = [{"type": "event_count", "event_type": "add_pin", "equals": 0}]
    path = tmp_path / "s.json"
    path.write_text(json.dumps(d))
    code, out, err = run(capsys, "run", "--scenario", str(path))
    assert code == 1 and "expectations failed" in err


def test_seed_override_changes_log(capsys, tmp_path):
    run(capsys, "run", "--scenario", "masked_unmask", "--out", str(tmp_path / "a"))
    run(capsys, "run", "--scenario", "masked_unmask", "--seed", "42", "--out", str(tmp_path / "b"))
    assert (tmp_path / "a" / "events.jsonl").read_text() != (tmp_path / "b" / "events.jsonl").read_text()


def test_finality_presets(capsys):
    code, out, _ = run(capsys, "finality", "--preset", "mainnet")
    assert code == 0 and "15 blocks / 225 s" in out
    code, out, _ = run(capsys, "finality", "--preset", "ibft")
    assert code == 0 and "contest 5 blocks" in out


def test_finality_hourly_json(capsys):
    code, out, _ = run(capsys, "finality", "--preset", "mainnet", "--pinning-period", "240",
                       "--format", "json")
    assert json.loads(out)["worst_case_seconds"] == 3825


def test_finality_custom_layers(capsys):
    code, out, _ = run(capsys, "finality", "--layer", "ibft:pinning_period=10",
                       "--layer", "mainnet:pinning_period=240", "--format", "json")
    assert code == 0 and json.loads(out)["worst_case_seconds"] == 3855


def test_finality_from_scenario(capsys):
    code, out, _ = run(capsys, "finality", "--scenario", "hierarchy", "--format", "json")
    assert code == 0 and json.loads(out)["worst_case_seconds"] == 315


@pytest.mark.parametrize("argv", [
    ["finality"],
    ["finality", "--layer", "observe_depth=1"],
    ["finality", "--layer", "mainnet:voting_period=2"],
    ["finality", "--layer", "bogus:observe_depth=1"],
])
def test_finality_invalid_exits_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err


def test_verify_log_round_trip(capsys, tmp_path):
    run(capsys, "run", "--scenario", "rate_hiding", "--out", str(tmp_path))
    d = json.loads(bundled_path("rate_hiding").read_text())
    chain = next(c for c in d["chains"] if c["id"] == "chain_b")
    code, out, _ = run(capsys, "verify-log", "--log", str(tmp_path / "events.jsonl"),
                       "--pbi", chain["pbi"], "--secret", chain["secret"], "--format", "json")
    assert code == 0
    assert json.loads(out)["count"] == sum(
        1 for l in (tmp_path / "events.jsonl").read_text().splitlines()
        if json.loads(l)["event_type"] == "add_pin" and json.loads(l)["caller"].endswith("92"))


def test_verify_log_empty(capsys, tmp_path):
    log = tmp_path / "empty.jsonl"
    log.write_text("")
    code, out, _ = run(capsys, "verify-log", "--log", str(log), "--pbi", "0x" + "11" * 32,
                       "--secret", "0x" + "22" * 32)
    assert code == 0 and out.startswith("0 pins")


def test_verify_log_bad_hex(capsys, tmp_path):
    log = tmp_path / "empty.jsonl"
    log.write_text("")
    code, _, err = run(capsys, "verify-log", "--log", str(log), "--pbi", "11", "--secret", "0x22")
    assert code == 2
