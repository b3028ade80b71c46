"""Chain secrets never reach logs, state snapshots or reports."""

import json

import pytest

from statepin.cli import main
from statepin.scenario import BUNDLED, bundled_path


def secret_needles(name):
    d = json.loads(bundled_path(name).read_text())
    needles = []
    for c in d["chains"]:
        if "secret" in c:
            raw = bytes.fromhex(c["secret"][2:])
            needles += [raw, raw.hex().encode(), raw.hex().upper().encode()]
    return needles


@pytest.mark.parametrize("name", BUNDLED)
def test_no_secret_bytes_in_outputs(name, tmp_path, capsys):
    main(["run", "--scenario", name, "--out", str(tmp_path), "--format", "json"])
    stdout = capsys.readouterr().out.encode()
    blobs = [p.read_bytes() for p in tmp_path.iterdir()] + [stdout]
    for needle in secret_needles(name):
        for blob in blobs:
            assert needle not in blob
