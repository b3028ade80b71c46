"""Tick-driven simulation of private chains pinning into management registries.

One tick is one block of the fastest chain; a chain with ``ticks_per_block``
k mints on every k-th tick.  Within a tick, chains mint deepest-first, and
after each mint the actors react.  A pin for a leaf block can therefore land
in a management block minted on the same tick, while a reaction to a
management block always lands in that chain's next block.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional

from statepin.chain_sim.actors import ParticipantActor, Receipt, Tx
from statepin.chain_sim.topology import ConfigError, ManagementChain, Topology
from statepin.crypto_core import KeyChain, keccak256, mask_participant, to_hex, from_hex
from statepin.registry import RegistryError, dumps_canonical

SCRIPT_TYPES = ("false_pin", "squat")


@dataclass
class PostedPin:
    chain: str
    block: int
    mgmt: str
    key: bytes
    posted_at: int


@dataclass
class SimulationResult:
    topology: Topology
    lines: list
    ground_truth: dict
    posted: list
    duration: int

    def log_text(self) -> str:
        return "".join(line + "\n" for line in self.lines)

    def final_state(self) -> dict:
        return {
            mid: self.topology.managers[mid].registry.snapshot()
            for mid in sorted(self.topology.managers)
        }

    def final_state_text(self) -> str:
        return dumps_canonical(self.final_state()) + "\n"

    def event_counts(self) -> Counter:
        return Counter(json.loads(l)["event_type"] for l in self.lines)

    def op_counts(self) -> dict:
        total = Counter()
        for mgmt in self.topology.managers.values():
            total.update(mgmt.registry.op_counts)
        return dict(sorted(total.items()))

    # -- measured finality ------------------------------------------------

    def final_tick(self, chain_id: str, block: int) -> Optional[int]:
        """Tick at which ``block`` of ``chain_id`` can no longer be changed.

        A block is final once some uncontested pin covering it is final on
        its management chain and, if that chain pins further up, the
        management block where the pin became final is itself final.
        """
        link = self.topology.links.get(chain_id)
        if link is None:
            return None
        mgmt = self.topology.managers[link.mgmt_id]
        for rec in self._posted_by_chain().get(chain_id, []):
            if rec.block < block:
                continue
            entry = mgmt.registry.state.pins.get(rec.key)
            if entry is None or entry.contested:
                continue
            final_height = rec.posted_at + mgmt.dispute_period
            if final_height > mgmt.chain.height:
                return None
            if link.mgmt_id in self.topology.links:
                return self.final_tick(link.mgmt_id, final_height)
            return mgmt.chain.mint_ticks[final_height]
        return None

    def worst_case_finality_seconds(self, chain_id: str) -> Optional[float]:
        chain = self.topology.chains[chain_id]
        worst = None
        for b in range(1, chain.height + 1):
            ft = self.final_tick(chain_id, b)
            if ft is None:
                continue
            age = ft - chain.mint_ticks[b]
            worst = age if worst is None else max(worst, age)
        return None if worst is None else worst * self.topology.tick_seconds

    def _posted_by_chain(self) -> dict:
        cache = getattr(self, "_posted_cache", None)
        if cache is None:
            cache = {}
            for rec in sorted(self.posted, key=lambda r: (r.block, r.posted_at)):
                cache.setdefault(rec.chain, []).append(rec)
            self._posted_cache = cache
        return cache


class Simulation:
    def __init__(self, topology: Topology, actors: Iterable[ParticipantActor],
                 script: Iterable[dict] = (), seed: int = 0):
        topology.validate()
        self.topology = topology
        self.actors = list(actors)
        self.script = sorted(script, key=lambda e: e["tick"])
        self.seed = seed
        self.tick = 0
        self.lines: list[str] = []
        self.ground_truth: dict = {}
        self.posted: list[PostedPin] = []
        self._rngs: dict[str, random.Random] = {}
        self._hash_cache: dict[str, tuple] = {}
        self._check_actors()
        for actor in self.actors:
            actor.bind(topology)

    # -- setup --------------------------------------------------------------

    def _check_actors(self) -> None:
        accounts = set()
        for a in self.actors:
            if a.account in accounts:
                raise ConfigError(f"duplicate actor account {to_hex(a.account)}")
            accounts.add(a.account)
            for cid in a.chains + a.guards:
                if cid not in self.topology.links:
                    raise ConfigError(f"actor {a.label} references chain {cid!r} that pins nowhere")

    def _genesis(self) -> None:
        for cid in self.topology.bottom_up():
            chain = self.topology.chains[cid]
            if chain.headers:
                raise ConfigError(f"chain {cid!r} already has blocks")
            mgmt = self.topology.managers.get(cid)
            if mgmt is None:
                header = chain.mint_block(self._rng(cid).randbytes(32), 0)
            else:
                self._register_sidechains(mgmt)
                for ev in mgmt.registry.events:
                    mgmt.index.ingest(ev)
                    self._log_registry_event(cid, ev)
                header = chain.mint_block(self._events_root(mgmt.registry.events), 0)
            self._log(cid, "mint", header.number, None, self._mint_payload(header))

    def _register_sidechains(self, mgmt: ManagementChain) -> None:
        admin = mgmt.admins[0]
        for link in self.topology.links_into(mgmt.chain.chain_id):
            unmasked, masked = [], []
            for a in self.actors:
                if link.chain_id not in a.chains:
                    continue
                if a.is_masked_in(link.chain_id):
                    masked.append(mask_participant(a.account, a.salts[link.chain_id]))
                else:
                    unmasked.append(a.account)
            mgmt.registry.add_sidechain(admin, link.pbi, link.voting, unmasked, masked)

    # -- main loop ------------------------------------------------------------

    def run(self, duration: int) -> SimulationResult:
        if duration < 0:
            raise ConfigError("duration must be non-negative")
        self._genesis()
        order = self.topology.bottom_up()
        script = list(self.script)
        for tick in range(1, duration + 1):
            self.tick = tick
            while script and script[0]["tick"] <= tick:
                self._run_script_event(script.pop(0))
            for cid in order:
                chain = self.topology.chains[cid]
                if tick % chain.ticks_per_block:
                    continue
                self._mint(cid)
                for actor in self.actors:
                    for tx in actor.on_block(cid, self):
                        self.submit(tx)
        return SimulationResult(self.topology, self.lines, self.ground_truth, self.posted, duration)

    def submit(self, tx: Tx) -> None:
        self.topology.managers[tx.mgmt_id].mempool.append(tx)

    def _mint(self, cid: str) -> None:
        chain = self.topology.chains[cid]
        mgmt = self.topology.managers.get(cid)
        self._hash_cache.pop(cid, None)
        if mgmt is None:
            header = chain.mint_block(self._rng(cid).randbytes(32), self.tick)
            self._log(cid, "mint", header.number, None, self._mint_payload(header))
            return
        reg = mgmt.registry
        height = chain.height + 1
        reg.advance_height(height)
        first = len(reg.events)
        receipts = []
        for tx in mgmt.mempool:
            receipts.append((tx, self._execute(mgmt, tx, height)))
        mgmt.mempool.clear()
        header = chain.mint_block(self._events_root(reg.events[first:]), self.tick)
        self._log(cid, "mint", header.number, None, self._mint_payload(header))
        for tx, receipt in receipts:
            if tx.on_receipt is not None:
                tx.on_receipt(receipt)

    def _execute(self, mgmt: ManagementChain, tx: Tx, height: int) -> Receipt:
        reg = mgmt.registry
        first = len(reg.events)
        try:
            result = getattr(reg, tx.op)(tx.caller, *tx.args)
        except RegistryError as err:
            self._log(mgmt.chain.chain_id, "tx_rejected", height, tx.caller,
                      {"op": tx.op, "error": type(err).__name__})
            return Receipt(False, height, error=err)
        for ev in reg.events[first:]:
            mgmt.index.ingest(ev)
            self._log_registry_event(mgmt.chain.chain_id, ev)
        if tx.op == "add_pin":
            key = tx.args[0]
            if tx.chain is not None:
                self.ground_truth[key] = tx.chain
            if tx.pinned_block is not None:
                self.posted.append(PostedPin(tx.chain, tx.pinned_block, tx.mgmt_id, key, height))
        return Receipt(True, height, result=result)

    # -- adversary script -------------------------------------------------------

    def _run_script_event(self, event: dict) -> None:
        kind = event["type"]
        cid = event["chain"]
        link = self.topology.links[cid]
        mgmt = self.topology.managers[link.mgmt_id]
        caller = from_hex(event["actor"], 20)
        key = self._next_key_at_tip(cid)
        if kind == "false_pin" and "revert_to" in event:
            fork = self.topology.chains[cid].copy(chain_id=f"{cid}-fork")
            rng = self._rng(f"{cid}/fork")
            tip = fork.height
            to_height = int(event["revert_to"])
            fork.revert_chain(to_height, [rng.randbytes(32) for _ in range(tip - to_height)])
            pin = fork.tip.hash
            self._log(cid, "revert", fork.height, caller,
                      {"to_height": to_height, "fork_tip": to_hex(pin)})
        elif kind in SCRIPT_TYPES:
            pin = self._rng(f"{cid}/garbage").randbytes(32)
        else:
            raise ConfigError(f"unknown script event {kind!r}")
        self._log(link.mgmt_id, "adversary", mgmt.chain.height, caller,
                  {"action": kind, "key": to_hex(key)})
        self.submit(Tx(caller, link.mgmt_id, "add_pin", (key, pin), chain=cid))

    def _next_key_at_tip(self, cid: str) -> bytes:
        """Next key of ``cid`` as an insider reading the registry tip would compute it."""
        link = self.topology.links[cid]
        mgmt = self.topology.managers[link.mgmt_id]
        keys = KeyChain(link.pbi, link.secret)
        while True:
            key = keys.next_key()
            entry = mgmt.registry.state.pins.get(key)
            if entry is None:
                return key
            if entry.contested:
                keys.skip()
            else:
                keys.accept(key, entry.pin)

    # -- helpers used by actors ---------------------------------------------------

    def honest_hashes(self, cid: str) -> frozenset:
        cached = self._hash_cache.get(cid)
        if cached is None:
            cached = frozenset(self.topology.chains[cid].hashes())
            self._hash_cache[cid] = cached
        return cached

    def decision(self, actor: ParticipantActor, chain_id: str, decision: str, payload: dict) -> None:
        chain = self.topology.chains[chain_id]
        body = {"decision": decision, "actor": actor.name}
        body.update(payload)
        self._log(chain_id, "actor_decision", chain.height, actor.account, body)

    # -- logging --------------------------------------------------------------------

    def _log(self, chain_id, event_type, height, caller, payload) -> None:
        line = {"tick": self.tick, "chain": chain_id, "event_type": event_type,
                "height": height, "caller": None if caller is None else to_hex(caller),
                "payload": payload}
        self.lines.append(dumps_canonical(line))

    def _log_registry_event(self, chain_id, ev) -> None:
        self._log(chain_id, ev.event_type, ev.height, ev.caller, ev.payload)

    @staticmethod
    def _mint_payload(header) -> dict:
        return {"hash": to_hex(header.hash), "parent_hash": to_hex(header.parent_hash),
                "tx_root": to_hex(header.tx_root)}

    @staticmethod
    def _events_root(events) -> bytes:
        return keccak256("".join(ev.to_line() for ev in events).encode())

    def _rng(self, stream: str) -> random.Random:
        rng = self._rngs.get(stream)
        if rng is None:
            rng = random.Random(f"{self.seed}/{stream}")
            self._rngs[stream] = rng
        return rng


def run_simulation(topology: Topology, actors, script=(), duration: int = 100,
                   seed: int = 0) -> SimulationResult:
    return Simulation(topology, actors, script, seed).run(duration)
