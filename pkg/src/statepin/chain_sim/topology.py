"""Pinning topologies: which chain pins to which management chain, and how often."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from statepin.chain_sim.chain import ChainNode
from statepin.crypto_core import CONTESTED, PBI, ChainSecret, MapKey, Pin, from_hex
from statepin.finality import LayerParams
from statepin.registry import PinRegistry, VotingConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PinSchedule:
    pinning_period: int

    def __post_init__(self):
        if self.pinning_period < 1:
            raise ConfigError("pinning_period must be >= 1")

    def due(self, block_number: int) -> bool:
        return block_number > 0 and block_number % self.pinning_period == 0


@dataclass
class PinLink:
    """``chain_id`` posts pins into the registry hosted on ``mgmt_id``."""

    chain_id: str
    mgmt_id: str
    schedule: PinSchedule
    pbi: PBI
    secret: ChainSecret = field(repr=False)
    voting: VotingConfig = VotingConfig()


@dataclass
class PinRecord:
    """What an observer of the management chain can learn about one key."""

    key: MapKey
    pin: Pin
    posted_at: int
    contested_at: Optional[int] = None

    def value_at(self, height: int) -> Pin:
        if self.contested_at is not None and self.contested_at <= height:
            return CONTESTED
        return self.pin

    def contested_by(self, height: int) -> bool:
        return self.contested_at is not None and self.contested_at <= height


@dataclass
class ProposalRecord:
    pbi: PBI
    proposal_id: int
    kind: str
    target: bytes
    opened_at: int
    actioned_at: Optional[int] = None
    outcome: Optional[str] = None

    def open_at(self, height: int) -> bool:
        return self.opened_at <= height and (self.actioned_at is None or self.actioned_at > height)


class PinIndex:
    """Height-aware view of a registry, rebuilt from its events.

    Lets an observer ask what the map looked like at a trusted (visible)
    height rather than at the tip.
    """

    def __init__(self):
        self.pins: dict[MapKey, PinRecord] = {}
        self.proposals: dict[tuple, ProposalRecord] = {}

    def ingest(self, event) -> None:
        p = event.payload
        if event.event_type == "add_pin":
            key = from_hex(p["key"])
            self.pins[key] = PinRecord(key, from_hex(p["pin"]), event.height)
        elif event.event_type == "propose_vote":
            pbi = from_hex(p["pbi"])
            self.proposals[(pbi, p["proposal_id"])] = ProposalRecord(
                pbi, p["proposal_id"], p["action"]["kind"], from_hex(p["action"]["target"]),
                event.height)
        elif event.event_type == "action_votes":
            pbi = from_hex(p["pbi"])
            rec = self.proposals[(pbi, p["proposal_id"])]
            rec.actioned_at = event.height
            rec.outcome = p["outcome"]
            if p["outcome"] == "passed" and rec.kind == "contest_pin":
                self.pins[rec.target].contested_at = event.height

    def observe(self, key: MapKey, height: int) -> Optional[PinRecord]:
        rec = self.pins.get(key)
        if rec is None or rec.posted_at > height:
            return None
        return rec

    def open_contests(self, pbi: PBI, height: int) -> list[ProposalRecord]:
        return [r for r in self.proposals.values()
                if r.pbi == pbi and r.kind == "contest_pin" and r.open_at(height)]


@dataclass
class ManagementChain:
    chain: ChainNode
    registry: PinRegistry
    admins: list = field(default_factory=list)
    mempool: list = field(default_factory=list)
    index: PinIndex = field(default_factory=PinIndex)

    @property
    def dispute_period(self) -> int:
        return self.registry.state.config.pin_dispute_period


@dataclass
class Topology:
    """Chains plus pinning links; leaves pin upward, the root pins nowhere."""

    chains: dict = field(default_factory=dict)
    links: dict = field(default_factory=dict)
    managers: dict = field(default_factory=dict)

    def add_chain(self, chain: ChainNode) -> None:
        if chain.chain_id in self.chains:
            raise ConfigError(f"duplicate chain {chain.chain_id!r}")
        self.chains[chain.chain_id] = chain

    def add_manager(self, mgmt: ManagementChain) -> None:
        self.managers[mgmt.chain.chain_id] = mgmt

    def add_link(self, link: PinLink) -> None:
        self.links[link.chain_id] = link

    def validate(self) -> None:
        if not self.chains:
            raise ConfigError("topology has no chains")
        for mid in self.managers:
            if mid not in self.chains:
                raise ConfigError(f"registry hosted on unknown chain {mid!r}")
        pbis = {}
        for link in self.links.values():
            if link.chain_id not in self.chains:
                raise ConfigError(f"unknown pinned chain {link.chain_id!r}")
            if link.mgmt_id not in self.managers:
                raise ConfigError(f"{link.chain_id!r} pins to {link.mgmt_id!r}, which hosts no registry")
            if link.chain_id == link.mgmt_id:
                raise ConfigError(f"{link.chain_id!r} pins to itself")
            link.voting.validate()
            dispute = self.managers[link.mgmt_id].dispute_period
            if link.voting.voting_period >= dispute:
                raise ConfigError(f"{link.chain_id!r}: voting_period {link.voting.voting_period} "
                                  f"must be below the pin dispute period {dispute}")
            slot = (link.mgmt_id, link.pbi)
            if slot in pbis:
                raise ConfigError(f"{link.chain_id!r} and {pbis[slot]!r} share a PBI on {link.mgmt_id!r}")
            pbis[slot] = link.chain_id
        for cid in self.chains:
            self.path(cid)  # raises on cycles
        tick_lengths = {c.block_period / c.ticks_per_block for c in self.chains.values()}
        if len(tick_lengths) > 1:
            raise ConfigError("block_period / ticks_per_block must agree across chains "
                              f"(one global tick), got {sorted(tick_lengths)}")

    @property
    def tick_seconds(self) -> float:
        c = next(iter(self.chains.values()))
        return c.block_period / c.ticks_per_block

    def path(self, chain_id: str) -> list[PinLink]:
        """Links from ``chain_id`` up to the root."""
        out = []
        seen = {chain_id}
        cur = chain_id
        while cur in self.links:
            link = self.links[cur]
            if link.mgmt_id in seen:
                raise ConfigError(f"pinning cycle through {link.mgmt_id!r}")
            seen.add(link.mgmt_id)
            out.append(link)
            cur = link.mgmt_id
        return out

    def depth(self, chain_id: str) -> int:
        return len(self.path(chain_id))

    def bottom_up(self) -> list[str]:
        """Chains ordered deepest first, declaration order within a level."""
        ids = list(self.chains)
        return sorted(ids, key=lambda c: (-self.depth(c), ids.index(c)))

    def links_into(self, mgmt_id: str) -> list[PinLink]:
        return [l for l in self.links.values() if l.mgmt_id == mgmt_id]

    def layer_params(self, chain_id: str) -> list[LayerParams]:
        """Closed-form finality parameters for every pinning layer above ``chain_id``."""
        layers = []
        for link in self.path(chain_id):
            lower = self.chains[link.chain_id]
            mgmt = self.chains[link.mgmt_id]
            ticks = link.schedule.pinning_period * lower.ticks_per_block
            pinning_blocks = -(-ticks // mgmt.ticks_per_block)
            instant = mgmt.finality_mode == "instant"
            layers.append(LayerParams(
                observe_depth=1 if instant else mgmt.confirm_depth,
                unmask_blocks=1,
                voting_period=link.voting.voting_period,
                action_blocks=1,
                block_period=int(mgmt.block_period),
                pinning_period=pinning_blocks,
                mode=mgmt.finality_mode,
                name=f"{link.chain_id}->{link.mgmt_id}",
            ))
        return layers
