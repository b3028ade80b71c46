"""Simulated participants: pin-posting guardians and contest-capable watchers.

Actors never touch a registry directly.  They return :class:`Tx` objects that
the simulator queues on the management chain's mempool and executes in the
next block; the outcome comes back as a :class:`Receipt`.  One decision step
therefore costs one management-chain block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from statepin.crypto_core import (
    CONTESTED,
    AccountId,
    KeyChain,
    MapKey,
    Pin,
    to_hex,
)
from statepin.registry import Action, DuplicateActiveProposal

ROLES = ("member", "masked_member", "quiet_guardian")


@dataclass
class Receipt:
    ok: bool
    height: int
    result: Any = None
    error: Optional[Exception] = None


@dataclass
class Tx:
    caller: AccountId
    mgmt_id: str
    op: str
    args: tuple
    chain: Optional[str] = None
    on_receipt: Optional[Callable[[Receipt], None]] = field(default=None, repr=False)
    # block number of the pinned chain, for add_pin posted by a guardian
    pinned_block: Optional[int] = None


@dataclass
class GuardState:
    keys: KeyChain
    phase: str = "idle"  # idle | awaiting
    pending: Optional[tuple] = None
    receipt: Optional[Receipt] = None
    blocked_key: Optional[MapKey] = None


@dataclass
class WatchState:
    keys: KeyChain
    unmasked: bool
    phase: str = "idle"  # idle | contest | awaiting
    step: Optional[str] = None
    target: Optional[MapKey] = None
    target_pin: Optional[Pin] = None
    posted_at: int = 0
    proof: Optional[tuple] = None
    proposal_id: Optional[int] = None
    opened_at: Optional[int] = None
    pending: bool = False
    receipt: Optional[Receipt] = None
    voted: set = field(default_factory=set)


@dataclass
class ParticipantActor:
    """A simulated account.

    ``secret_access`` means the actor holds the chain secrets of every chain
    in ``chains`` and can therefore follow and contest their key sequences.
    A quiet guardian has no secret access; it reads headers and is handed
    only the key schedule of the chains in ``guards``.
    """

    account: AccountId
    role: str = "member"
    secret_access: bool = True
    name: str = ""
    chains: tuple = ()
    salts: dict = field(default_factory=dict)
    guards: tuple = ()
    adversarial: bool = False
    expected_tip: dict = field(default_factory=dict)
    watches: dict = field(default_factory=dict, repr=False)
    guard_states: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role == "quiet_guardian" and self.secret_access:
            raise ValueError("a quiet guardian cannot hold chain secrets")
        if self.role == "masked_member":
            missing = [c for c in self.chains if c not in self.salts]
            if missing:
                raise ValueError(f"masked member {self.label} lacks salts for {missing}")
        self.chains = tuple(self.chains)
        self.guards = tuple(self.guards)

    @property
    def label(self) -> str:
        return self.name or to_hex(self.account)

    def is_masked_in(self, chain_id: str) -> bool:
        return chain_id in self.salts

    def bind(self, topology) -> None:
        """Hand out key material for the chains this actor may follow or guard."""
        for cid in self.guards:
            link = topology.links[cid]
            self.guard_states[cid] = GuardState(KeyChain(link.pbi, link.secret))
        if self.secret_access:
            for cid in self.chains:
                link = topology.links.get(cid)
                if link is None:
                    continue
                self.watches[cid] = WatchState(KeyChain(link.pbi, link.secret),
                                               unmasked=not self.is_masked_in(cid))

    def on_block(self, chain_id: str, sim) -> list[Tx]:
        txs = []
        if chain_id in self.guard_states:
            tx = guardian_post_pin(self, sim, chain_id)
            if tx is not None:
                txs.append(tx)
        if chain_id in sim.topology.managers:
            txs.extend(watch_and_contest(self, sim, chain_id))
        return txs


# -- guardian ---------------------------------------------------------------

def guardian_post_pin(actor: ParticipantActor, sim, leaf_chain: str) -> Optional[Tx]:
    """Post the pinned chain's latest header hash if the schedule says a pin is due."""
    gs = actor.guard_states[leaf_chain]
    link = sim.topology.links[leaf_chain]
    chain = sim.topology.chains[leaf_chain]
    if gs.phase != "idle" or gs.pending is not None:
        return None
    if not link.schedule.due(chain.height):
        return None
    return _guardian_submit(actor, sim, leaf_chain)


def _guardian_submit(actor, sim, leaf_chain) -> Tx:
    gs = actor.guard_states[leaf_chain]
    link = sim.topology.links[leaf_chain]
    chain = sim.topology.chains[leaf_chain]
    key = gs.keys.next_key()
    pin = chain.tip.hash
    gs.pending = (key, pin)
    gs.receipt = None

    def on_receipt(r, gs=gs):
        gs.receipt = r

    return Tx(actor.account, link.mgmt_id, "add_pin", (key, pin), chain=leaf_chain,
              on_receipt=on_receipt, pinned_block=chain.height)


def _guardian_settle(actor: ParticipantActor, sim, mgmt_id: str) -> list[Tx]:
    txs = []
    mgmt = sim.topology.managers[mgmt_id]
    for cid, gs in actor.guard_states.items():
        if sim.topology.links[cid].mgmt_id != mgmt_id:
            continue
        if gs.pending is not None and gs.receipt is not None:
            key, pin = gs.pending
            r = gs.receipt
            gs.pending, gs.receipt = None, None
            if r.ok:
                gs.keys.accept(key, pin)
            else:
                gs.phase = "awaiting"
                gs.blocked_key = key
                sim.decision(actor, mgmt_id, "guardian_blocked", {"key": to_hex(key), "chain": cid})
        if gs.phase != "awaiting":
            continue
        vis = mgmt.chain.visible_height()
        rec = mgmt.index.observe(gs.blocked_key, vis)
        if rec is None:
            continue
        if rec.contested_by(vis):
            gs.keys.skip()
            gs.phase, gs.blocked_key = "idle", None
            sim.decision(actor, mgmt_id, "rollover", {"chain": cid, "counter": gs.keys.counter})
            txs.append(_guardian_submit(actor, sim, cid))
        elif vis - rec.posted_at >= mgmt.dispute_period:
            gs.keys.accept(rec.key, rec.pin)
            gs.phase, gs.blocked_key = "idle", None
            sim.decision(actor, mgmt_id, "adopt_final_pin", {"chain": cid, "key": to_hex(rec.key)})
    return txs


# -- watcher ----------------------------------------------------------------

def watch_and_contest(actor: ParticipantActor, sim, mgmt_id: str) -> list[Tx]:
    """Follow expected keys on ``mgmt_id`` and contest pins that do not match."""
    txs = _guardian_settle(actor, sim, mgmt_id)
    for cid, ws in actor.watches.items():
        link = sim.topology.links[cid]
        if link.mgmt_id != mgmt_id:
            continue
        tx = _watch_step(actor, sim, cid, ws)
        if tx is not None:
            txs.append(tx)
        tx = _side_vote(actor, sim, cid, ws)
        if tx is not None:
            txs.append(tx)
    return txs


def _watch_step(actor, sim, cid, ws: WatchState) -> Optional[Tx]:
    link = sim.topology.links[cid]
    mgmt = sim.topology.managers[link.mgmt_id]
    honest_hashes = sim.honest_hashes(cid)

    if ws.pending:
        if ws.receipt is None:
            return None
        tx = _handle_receipt(actor, sim, cid, ws)
        if tx is not None:
            return tx

    vis = mgmt.chain.visible_height()
    while True:
        if ws.phase == "idle":
            key = ws.keys.next_key()
            rec = mgmt.index.observe(key, vis)
            if rec is None:
                return None
            value = rec.value_at(vis)
            if value == CONTESTED:
                ws.keys.skip()
                sim.decision(actor, link.mgmt_id, "rollover", {"chain": cid, "counter": ws.keys.counter})
                continue
            if value in honest_hashes:
                ws.keys.accept(key, value)
                actor.expected_tip[cid] = value
                continue
            ws.target, ws.target_pin, ws.posted_at = key, value, rec.posted_at
            ws.proof = (ws.keys.prev_key, ws.keys.prf())
            sim.decision(actor, link.mgmt_id, "pin_mismatch", {"chain": cid, "key": to_hex(key)})
            if actor.adversarial:
                ws.phase = "awaiting"
                continue
            ws.phase = "contest"
            ws.step = "propose" if ws.unmasked else "unmask"
            continue
        if ws.phase == "awaiting":
            rec = mgmt.index.observe(ws.target, vis)
            if rec.contested_by(vis):
                ws.keys.skip()
                _reset(ws)
                sim.decision(actor, link.mgmt_id, "rollover", {"chain": cid, "counter": ws.keys.counter})
                continue
            if vis - rec.posted_at >= mgmt.dispute_period:
                ws.keys.accept(rec.key, rec.pin)
                actor.expected_tip[cid] = rec.pin
                _reset(ws)
                sim.decision(actor, link.mgmt_id, "adopt_final_pin", {"chain": cid, "key": to_hex(rec.key)})
                continue
            return None
        return _contest_step(actor, sim, cid, ws)


def _contest_step(actor, sim, cid, ws: WatchState) -> Optional[Tx]:
    link = sim.topology.links[cid]
    mgmt = sim.topology.managers[link.mgmt_id]
    if ws.step == "unmask":
        return _submit(actor, ws, link.mgmt_id, "unmask", (link.pbi, actor.salts[cid]), cid)
    if ws.step == "propose":
        return _submit(actor, ws, link.mgmt_id, "propose_vote",
                       (link.pbi, Action.contest_pin(ws.target), ws.proof), cid)
    if ws.step == "vote":
        return _submit(actor, ws, link.mgmt_id, "vote", (link.pbi, ws.proposal_id, True), cid)
    if ws.step == "action_wait":
        if mgmt.chain.height + 1 >= ws.opened_at + link.voting.voting_period:
            ws.step = "action"
            return _submit(actor, ws, link.mgmt_id, "action_votes", (link.pbi, ws.proposal_id), cid)
    return None


def _handle_receipt(actor, sim, cid, ws: WatchState) -> Optional[Tx]:
    link = sim.topology.links[cid]
    mgmt = sim.topology.managers[link.mgmt_id]
    r = ws.receipt
    ws.pending, ws.receipt = False, None
    step = ws.step
    if step == "unmask":
        if r.ok:
            ws.unmasked = True
            ws.step = "propose"
        else:
            ws.phase = "awaiting"
    elif step == "propose":
        if r.ok:
            ws.proposal_id, ws.opened_at = r.result, r.height
            ws.voted.add(r.result)
            ws.step = "action_wait"
        elif isinstance(r.error, DuplicateActiveProposal):
            ws.proposal_id = r.error.proposal_id
            ws.step = "vote"
        else:
            ws.phase = "awaiting"
    elif step == "vote":
        ws.voted.add(ws.proposal_id)
        ws.phase = "awaiting"
    elif step == "action":
        if r.ok and r.result == "passed":
            ws.keys.skip()
            _reset(ws)
            sim.decision(actor, link.mgmt_id, "contest_passed", {"chain": cid, "counter": ws.keys.counter})
        elif r.ok:
            next_block = mgmt.chain.height + 1
            window_end = ws.posted_at + mgmt.dispute_period
            if next_block + link.voting.voting_period < window_end:
                ws.step = "propose"
                sim.decision(actor, link.mgmt_id, "contest_retry", {"chain": cid})
            else:
                ws.phase = "awaiting"
                sim.decision(actor, link.mgmt_id, "contest_failed", {"chain": cid})
        else:
            ws.phase = "awaiting"
    return None


def _side_vote(actor, sim, cid, ws: WatchState) -> Optional[Tx]:
    """Vote on contests proposed by others: adversaries against, waiting honest watchers for."""
    if ws.pending or not ws.unmasked:
        return None
    if not actor.adversarial and ws.phase != "awaiting":
        return None
    link = sim.topology.links[cid]
    mgmt = sim.topology.managers[link.mgmt_id]
    vis = mgmt.chain.visible_height()
    for prop in mgmt.index.open_contests(link.pbi, vis):
        if prop.proposal_id in ws.voted:
            continue
        if not actor.adversarial and prop.target != ws.target:
            continue
        if mgmt.chain.height + 1 - prop.opened_at >= link.voting.voting_period:
            continue
        ws.voted.add(prop.proposal_id)
        approve = not actor.adversarial
        if actor.adversarial:
            sim.decision(actor, link.mgmt_id, "vote_against_contest",
                         {"chain": cid, "proposal_id": prop.proposal_id})
        return Tx(actor.account, link.mgmt_id, "vote", (link.pbi, prop.proposal_id, approve), chain=cid)
    return None


def _submit(actor, ws: WatchState, mgmt_id, op, args, cid) -> Tx:
    ws.pending, ws.receipt = True, None

    def on_receipt(r, ws=ws):
        ws.receipt = r

    return Tx(actor.account, mgmt_id, op, args, chain=cid, on_receipt=on_receipt)


def _reset(ws: WatchState) -> None:
    ws.phase, ws.step = "idle", None
    ws.target = ws.target_pin = ws.proof = None
    ws.proposal_id = ws.opened_at = None
