"""Reconstruct one chain's pins from a public event log using its secret.

Without the secret the keys in a shared registry are indistinguishable; with
it, walking the key chain picks out exactly that chain's entries.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable

from statepin.crypto_core import PBI, ChainSecret, KeyChain, derive_map_key, from_hex, prf_value, to_hex

DEFAULT_LOOKAHEAD = 4


@dataclass
class LoggedPin:
    key: bytes
    pin: bytes
    height: int
    chain: str | None = None
    contested: bool = False


@dataclass
class PartitionEntry:
    index: int
    key: str
    pin: str
    height: int
    status: str  # accepted | contested


@dataclass
class Partition:
    entries: list = field(default_factory=list)
    gaps: list = field(default_factory=list)

    @property
    def keys(self) -> set:
        return {e.key for e in self.entries}

    @property
    def contested(self) -> list:
        return [e for e in self.entries if e.status == "contested"]

    @property
    def broken(self) -> bool:
        return bool(self.gaps)

    def to_json(self) -> dict:
        return {"pins": [asdict(e) for e in self.entries], "gaps": self.gaps,
                "count": len(self.entries), "contested": len(self.contested)}

    def to_text(self) -> str:
        lines = [f"{len(self.entries)} pins identified, {len(self.contested)} contested, "
                 f"{len(self.gaps)} gaps"]
        for e in self.entries:
            lines.append(f"  #{e.index} {e.status:9s} key={e.key} pin={e.pin} height={e.height}")
        for g in self.gaps:
            lines.append(f"  gap: no pin for PRF indices {g[0]}..{g[1]}")
        return "\n".join(lines)


def pins_from_lines(lines: Iterable[str]) -> dict:
    """Map key -> :class:`LoggedPin` from registry or simulator JSON lines."""
    pins: dict[bytes, LoggedPin] = {}
    for line in lines:
        if not line.strip():
            continue
        ev = json.loads(line)
        payload = ev.get("payload", {})
        if ev["event_type"] == "add_pin":
            key = from_hex(payload["key"])
            pins[key] = LoggedPin(key, from_hex(payload["pin"]), int(ev["height"]), ev.get("chain"))
        elif (ev["event_type"] == "action_votes" and payload.get("outcome") == "passed"
              and payload["action"]["kind"] == "contest_pin"):
            target = from_hex(payload["action"]["target"])
            if target in pins:
                pins[target].contested = True
    return pins


def reconstruct(pins: dict, pbi: PBI, secret: ChainSecret,
                lookahead: int = DEFAULT_LOOKAHEAD) -> Partition:
    """Walk the key chain of ``(pbi, secret)`` through ``pins``.

    A missing key ends the walk unless one of the next ``lookahead`` PRF
    values (with the same predecessor) hits, which is reported as a gap.
    That catches a missing contested entry.  A missing accepted pin cannot
    be told apart from the end of the chain, because every later key is
    derived from the missing value.
    """
    keys = KeyChain(pbi, secret)
    part = Partition()
    while True:
        key = keys.next_key()
        rec = pins.get(key)
        if rec is None:
            skip = _probe_ahead(pins, keys, secret, lookahead)
            if skip is None:
                return part
            part.gaps.append([keys.counter, keys.counter + skip - 1])
            keys.counter += skip
            continue
        status = "contested" if rec.contested else "accepted"
        part.entries.append(PartitionEntry(keys.counter, to_hex(key), to_hex(rec.pin), rec.height, status))
        if rec.contested:
            keys.skip()
        else:
            keys.accept(key, rec.pin)


def _probe_ahead(pins, keys: KeyChain, secret: ChainSecret, lookahead: int):
    for j in range(1, lookahead + 1):
        k = derive_map_key(keys.pbi, keys.prev_pin, prf_value(secret, keys.counter + j))
        if k in pins:
            return j
    return None


def verify_log(lines: Iterable[str], pbi: PBI, secret: ChainSecret,
               lookahead: int = DEFAULT_LOOKAHEAD) -> Partition:
    return reconstruct(pins_from_lines(lines), pbi, secret, lookahead)
