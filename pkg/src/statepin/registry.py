"""Pin registry: the anonymous pinning contract as a deterministic state machine.

Every mutating command validates against the current state, emits an
:class:`Event`, and folds that event through :meth:`PinRegistry._apply`.
Replaying the event list through the same fold rebuilds an identical state,
which is what :meth:`PinRegistry.from_events` does.

Posting pins is permissionless.  Everything else (unmasking, proposing,
voting, actioning) requires the caller to be an unmasked participant of the
sidechain in question.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from statepin.crypto_core import (
    CONTESTED,
    GENESIS_PREV_KEY,
    MANAGEMENT_PBI,
    ZERO_PIN,
    AccountId,
    MapKey,
    MaskedId,
    PBI,
    Pin,
    derive_map_key,
    from_hex,
    mask_participant,
    to_hex,
)

logger = logging.getLogger(__name__)


class RegistryError(Exception):
    """Base class for rejected registry operations."""


class InvalidConfig(RegistryError):
    pass


class NotAuthorized(RegistryError):
    pass


class DuplicateSidechain(RegistryError):
    pass


class ReservedId(RegistryError):
    pass


class NoSuchSidechain(RegistryError):
    pass


class KeyOccupied(RegistryError):
    pass


class NotMasked(RegistryError):
    pass


class NoSuchPin(RegistryError):
    pass


class PinAlreadyContested(RegistryError):
    pass


class LinkageInvalid(RegistryError):
    pass


class DisputeWindowClosed(RegistryError):
    pass


class DuplicateActiveProposal(RegistryError):
    def __init__(self, message, proposal_id):
        super().__init__(message)
        self.proposal_id = proposal_id


class InvalidAction(RegistryError):
    pass


class NoSuchProposal(RegistryError):
    pass


class VotingClosed(RegistryError):
    pass


class AlreadyVoted(RegistryError):
    pass


class VotingStillOpen(RegistryError):
    pass


class AlreadyActioned(RegistryError):
    pass


class ClockRegression(RegistryError):
    pass


# voting algorithms: (yes, no, eligible) -> passed
def _strict_majority(yes: int, no: int, eligible: int) -> bool:
    return yes + no >= 1 and yes > no


def _absolute_majority(yes: int, no: int, eligible: int) -> bool:
    return 2 * yes > eligible


def _unanimous(yes: int, no: int, eligible: int) -> bool:
    # no dissent among the votes cast; abstaining does not block
    return yes >= 1 and no == 0


VOTING_ALGORITHMS: dict[str, Callable[[int, int, int], bool]] = {
    "majority": _strict_majority,
    "absolute_majority": _absolute_majority,
    "unanimous": _unanimous,
}


@dataclass(frozen=True)
class VotingConfig:
    algorithm: str = "majority"
    voting_period: int = 7

    def validate(self) -> None:
        if self.algorithm not in VOTING_ALGORITHMS:
            raise InvalidConfig(f"unknown voting algorithm {self.algorithm!r}")
        if self.voting_period < 1:
            raise InvalidConfig("voting_period must be >= 1")

    def to_json(self) -> dict:
        return {"algorithm": self.algorithm, "voting_period": self.voting_period}

    @classmethod
    def from_json(cls, data: dict) -> "VotingConfig":
        return cls(algorithm=data["algorithm"], voting_period=int(data["voting_period"]))


@dataclass(frozen=True)
class RegistryConfig:
    mgmt_voting: VotingConfig = VotingConfig()
    pin_dispute_period: int = 16

    def validate(self) -> None:
        self.mgmt_voting.validate()
        if self.pin_dispute_period <= self.mgmt_voting.voting_period:
            raise InvalidConfig(
                f"pin_dispute_period ({self.pin_dispute_period}) must exceed "
                f"voting_period ({self.mgmt_voting.voting_period})"
            )


ACTION_KINDS = ("add_unmasked", "add_masked", "remove_unmasked", "remove_masked", "contest_pin")


@dataclass(frozen=True)
class Action:
    kind: str
    target: bytes

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")
        expected = 20 if self.kind.endswith("unmasked") else 32
        if len(self.target) != expected:
            raise ValueError(f"{self.kind} target must be {expected} bytes")

    @classmethod
    def add_unmasked(cls, acct: AccountId) -> "Action":
        return cls("add_unmasked", acct)

    @classmethod
    def add_masked(cls, masked: MaskedId) -> "Action":
        return cls("add_masked", masked)

    @classmethod
    def remove_unmasked(cls, acct: AccountId) -> "Action":
        return cls("remove_unmasked", acct)

    @classmethod
    def remove_masked(cls, masked: MaskedId) -> "Action":
        return cls("remove_masked", masked)

    @classmethod
    def contest_pin(cls, target: MapKey) -> "Action":
        return cls("contest_pin", target)

    def to_json(self) -> dict:
        return {"kind": self.kind, "target": to_hex(self.target)}

    @classmethod
    def from_json(cls, data: dict) -> "Action":
        return cls(data["kind"], from_hex(data["target"]))


@dataclass
class SidechainRecord:
    pbi: PBI
    voting: VotingConfig
    unmasked: set = field(default_factory=set)
    masked: set = field(default_factory=set)

    def to_json(self) -> dict:
        return {
            "pbi": to_hex(self.pbi),
            "voting": self.voting.to_json(),
            "unmasked": sorted(to_hex(a) for a in self.unmasked),
            "masked": sorted(to_hex(m) for m in self.masked),
        }


@dataclass
class PinEntry:
    pin: Pin
    posted_at: int
    contested: bool = False

    def to_json(self) -> dict:
        return {"pin": to_hex(self.pin), "posted_at": self.posted_at, "contested": self.contested}


@dataclass
class Proposal:
    id: int
    sidechain: PBI
    action: Action
    opened_at: int
    votes: dict = field(default_factory=dict)
    actioned: bool = False
    outcome: Optional[str] = None

    def tally(self, eligible: set) -> tuple[int, int]:
        # votes from accounts removed since voting are discarded
        yes = sum(1 for a, v in self.votes.items() if v and a in eligible)
        no = sum(1 for a, v in self.votes.items() if not v and a in eligible)
        return yes, no

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "sidechain": to_hex(self.sidechain),
            "action": self.action.to_json(),
            "opened_at": self.opened_at,
            "votes": {to_hex(a): v for a, v in sorted(self.votes.items())},
            "actioned": self.actioned,
            "outcome": self.outcome,
        }


@dataclass(frozen=True)
class Event:
    """One line of the registry's JSON-lines log."""

    event_type: str
    height: int
    caller: Optional[AccountId]
    payload: dict

    def to_json(self) -> dict:
        return {
            "event_type": self.event_type,
            "height": self.height,
            "caller": None if self.caller is None else to_hex(self.caller),
            "payload": self.payload,
        }

    def to_line(self) -> str:
        return dumps_canonical(self.to_json())

    @classmethod
    def from_json(cls, data: dict) -> "Event":
        caller = data.get("caller")
        return cls(
            event_type=data["event_type"],
            height=int(data["height"]),
            caller=None if caller is None else from_hex(caller),
            payload=data["payload"],
        )


def dumps_canonical(obj) -> str:
    """Compact JSON with a fixed key order: top level as given, nested keys sorted."""
    if isinstance(obj, dict):
        parts = [json.dumps(k) + ":" + _dumps_sorted(v) for k, v in obj.items()]
        return "{" + ",".join(parts) + "}"
    return _dumps_sorted(obj)


def _dumps_sorted(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class RegistryState:
    config: RegistryConfig
    sidechains: dict = field(default_factory=dict)
    pins: dict = field(default_factory=dict)
    proposals: dict = field(default_factory=dict)
    height: int = 0
    next_proposal_id: int = 1


class PinRegistry:
    """Single-writer registry.  Callers supply a total order of operations."""

    def __init__(self, state: RegistryState):
        self.state = state
        self.events: list[Event] = []
        self.op_counts: Counter = Counter()

    # -- construction ----------------------------------------------------

    @classmethod
    def deploy(cls, config: RegistryConfig, genesis_admins: Iterable[AccountId],
               height: int = 0) -> "PinRegistry":
        admins = sorted(set(bytes(a) for a in genesis_admins))
        if not admins:
            raise InvalidConfig("at least one genesis admin is required")
        config.validate()
        reg = cls(RegistryState(config=config, height=height))
        reg._emit("deploy", None, {
            "mgmt_voting": config.mgmt_voting.to_json(),
            "pin_dispute_period": config.pin_dispute_period,
            "admins": [to_hex(a) for a in admins],
        })
        return reg

    @classmethod
    def from_events(cls, events: Iterable[Event], height: Optional[int] = None) -> "PinRegistry":
        """Rebuild a registry by folding a recorded event sequence."""
        events = list(events)
        if not events or events[0].event_type != "deploy":
            raise ValueError("event log must start with a deploy event")
        p = events[0].payload
        config = RegistryConfig(VotingConfig.from_json(p["mgmt_voting"]), int(p["pin_dispute_period"]))
        reg = cls(RegistryState(config=config, height=events[0].height))
        for ev in events:
            reg._record(ev)
        if height is not None:
            reg.advance_height(height)
        return reg

    # -- clock -----------------------------------------------------------

    @property
    def height(self) -> int:
        return self.state.height

    def advance_height(self, new_height: int) -> None:
        if new_height < self.state.height:
            raise ClockRegression(f"height {new_height} < current {self.state.height}")
        self.state.height = new_height

    # -- commands --------------------------------------------------------

    def add_sidechain(self, caller: AccountId, pbi: PBI, voting: VotingConfig,
                      unmasked0: Iterable[AccountId] = (), masked0: Iterable[MaskedId] = ()) -> None:
        self._require_unmasked(caller, MANAGEMENT_PBI)
        if pbi == MANAGEMENT_PBI:
            raise ReservedId("the all-zero identifier is reserved for the management sidechain")
        if pbi in self.state.sidechains:
            raise DuplicateSidechain(f"sidechain {to_hex(pbi)} already registered")
        voting.validate()
        if voting.voting_period >= self.state.config.pin_dispute_period:
            raise InvalidConfig("sidechain voting_period must be below pin_dispute_period")
        self._emit("add_sidechain", caller, {
            "pbi": to_hex(pbi),
            "voting": voting.to_json(),
            "unmasked": sorted(to_hex(a) for a in set(unmasked0)),
            "masked": sorted(to_hex(m) for m in set(masked0)),
        })

    def add_pin(self, caller: AccountId, key: MapKey, pin: Pin) -> None:
        if key in self.state.pins:
            raise KeyOccupied(f"map key {to_hex(key)} already holds a pin")
        self._emit("add_pin", caller, {"key": to_hex(key), "pin": to_hex(pin)})

    def unmask(self, caller: AccountId, pbi: PBI, salt: bytes) -> None:
        record = self._sidechain(pbi)
        masked = mask_participant(caller, salt)
        if masked not in record.masked:
            raise NotMasked("no masked participant matches this account and salt")
        self._emit("unmask", caller, {"pbi": to_hex(pbi), "masked": to_hex(masked)})

    def propose_vote(self, caller: AccountId, pbi: PBI, action: Action,
                     contest_proof: Optional[tuple[MapKey, bytes]] = None) -> int:
        record = self._require_unmasked(caller, pbi)
        payload = {"pbi": to_hex(pbi), "proposal_id": self.state.next_proposal_id,
                   "action": action.to_json()}
        if action.kind == "contest_pin":
            payload.update(self._check_contest(pbi, action.target, contest_proof))
        else:
            self._check_membership_action(record, action)
        for prop in self.state.proposals.values():
            if prop.sidechain == pbi and not prop.actioned and prop.action == action:
                raise DuplicateActiveProposal(
                    f"proposal {prop.id} for the same action is still open", prop.id)
        self._emit("propose_vote", caller, payload)
        return payload["proposal_id"]

    def vote(self, caller: AccountId, pbi: PBI, proposal_id: int, approve: bool) -> None:
        self._require_unmasked(caller, pbi)
        prop = self._proposal(pbi, proposal_id)
        if prop.actioned or self.height - prop.opened_at >= self._voting(pbi).voting_period:
            raise VotingClosed(f"voting on proposal {proposal_id} has closed")
        if caller in prop.votes:
            raise AlreadyVoted(f"{to_hex(caller)} already voted on {proposal_id}")
        self._emit("vote", caller, {"pbi": to_hex(pbi), "proposal_id": proposal_id,
                                    "approve": bool(approve)})

    def action_votes(self, caller: AccountId, pbi: PBI, proposal_id: int) -> str:
        record = self._require_unmasked(caller, pbi)
        prop = self._proposal(pbi, proposal_id)
        if prop.actioned:
            raise AlreadyActioned(f"proposal {proposal_id} was already actioned")
        voting = self._voting(pbi)
        if self.height - prop.opened_at < voting.voting_period:
            raise VotingStillOpen(f"proposal {proposal_id} is still open for voting")
        if prop.action.kind == "contest_pin":
            entry = self.state.pins[prop.action.target]
            if self.height - entry.posted_at >= self.state.config.pin_dispute_period:
                raise DisputeWindowClosed("the pin dispute period has expired")
        yes, no = prop.tally(record.unmasked)
        passed = VOTING_ALGORITHMS[voting.algorithm](yes, no, len(record.unmasked))
        outcome = "passed" if passed else "failed"
        self._emit("action_votes", caller, {"pbi": to_hex(pbi), "proposal_id": proposal_id,
                                            "outcome": outcome, "yes": yes, "no": no,
                                            "action": prop.action.to_json()})
        if (passed and prop.action.kind == "remove_unmasked" and not record.unmasked):
            self._emit("warning", None, {"pbi": to_hex(pbi), "message": "no_unmasked_participants"})
        return outcome

    # -- queries ---------------------------------------------------------

    def get_pin(self, key: MapKey) -> Optional[Pin]:
        entry = self.state.pins.get(key)
        return None if entry is None else entry.pin

    def is_pin_final(self, key: MapKey) -> bool:
        entry = self.state.pins.get(key)
        if entry is None:
            raise NoSuchPin(f"no pin at {to_hex(key)}")
        return (not entry.contested
                and self.height - entry.posted_at >= self.state.config.pin_dispute_period)

    def sidechain(self, pbi: PBI) -> SidechainRecord:
        return self._sidechain(pbi)

    def open_proposal(self, pbi: PBI, action: Action) -> Optional[Proposal]:
        for prop in self.state.proposals.values():
            if prop.sidechain == pbi and prop.action == action and not prop.actioned:
                return prop
        return None

    def proposal(self, pbi: PBI, proposal_id: int) -> Proposal:
        return self._proposal(pbi, proposal_id)

    # -- serialization ---------------------------------------------------

    def snapshot(self) -> dict:
        s = self.state
        return {
            "config": {
                "mgmt_voting": s.config.mgmt_voting.to_json(),
                "pin_dispute_period": s.config.pin_dispute_period,
            },
            "height": s.height,
            "next_proposal_id": s.next_proposal_id,
            "sidechains": [s.sidechains[k].to_json() for k in sorted(s.sidechains)],
            "pins": {to_hex(k): s.pins[k].to_json() for k in sorted(s.pins)},
            "proposals": [s.proposals[k].to_json() for k in sorted(s.proposals)],
        }

    def snapshot_json(self) -> str:
        return _dumps_sorted(self.snapshot())

    def event_lines(self) -> str:
        return "".join(ev.to_line() + "\n" for ev in self.events)

    # -- internals -------------------------------------------------------

    def _emit(self, event_type: str, caller: Optional[AccountId], payload: dict) -> Event:
        ev = Event(event_type, self.height, None if caller is None else bytes(caller), payload)
        self._record(ev)
        return ev

    def _record(self, ev: Event) -> None:
        if ev.height < self.state.height:
            raise ClockRegression(f"event at {ev.height} precedes height {self.state.height}")
        self.state.height = ev.height
        self._apply(ev)
        self.events.append(ev)
        label = ev.event_type
        if ev.event_type in ("propose_vote", "action_votes"):
            label = f"{ev.event_type}:{ev.payload['action']['kind']}"
        self.op_counts[label] += 1

    def _apply(self, ev: Event) -> None:
        s = self.state
        p = ev.payload
        kind = ev.event_type
        if kind == "deploy":
            admins = {from_hex(a) for a in p["admins"]}
            s.sidechains[MANAGEMENT_PBI] = SidechainRecord(MANAGEMENT_PBI, s.config.mgmt_voting, admins)
        elif kind == "add_sidechain":
            pbi = from_hex(p["pbi"])
            s.sidechains[pbi] = SidechainRecord(
                pbi, VotingConfig.from_json(p["voting"]),
                {from_hex(a) for a in p["unmasked"]}, {from_hex(m) for m in p["masked"]})
        elif kind == "add_pin":
            s.pins[from_hex(p["key"])] = PinEntry(from_hex(p["pin"]), ev.height)
        elif kind == "unmask":
            record = s.sidechains[from_hex(p["pbi"])]
            record.masked.discard(from_hex(p["masked"]))
            record.unmasked.add(ev.caller)
        elif kind == "propose_vote":
            pbi = from_hex(p["pbi"])
            pid = int(p["proposal_id"])
            s.proposals[(pbi, pid)] = Proposal(pid, pbi, Action.from_json(p["action"]), ev.height,
                                               votes={ev.caller: True})
            s.next_proposal_id = pid + 1
        elif kind == "vote":
            prop = s.proposals[(from_hex(p["pbi"]), int(p["proposal_id"]))]
            prop.votes[ev.caller] = bool(p["approve"])
        elif kind == "action_votes":
            pbi = from_hex(p["pbi"])
            prop = s.proposals[(pbi, int(p["proposal_id"]))]
            prop.actioned = True
            prop.outcome = p["outcome"]
            if p["outcome"] == "passed":
                self._apply_action(s.sidechains[pbi], prop.action)
        elif kind == "warning":
            logger.warning("sidechain %s: %s", p["pbi"], p["message"])
        else:
            raise ValueError(f"unknown event type {kind!r}")

    def _apply_action(self, record: SidechainRecord, action: Action) -> None:
        if action.kind == "add_unmasked":
            record.unmasked.add(action.target)
        elif action.kind == "add_masked":
            record.masked.add(action.target)
        elif action.kind == "remove_unmasked":
            record.unmasked.discard(action.target)
        elif action.kind == "remove_masked":
            record.masked.discard(action.target)
        else:
            entry = self.state.pins[action.target]
            entry.pin = CONTESTED
            entry.contested = True

    def _check_contest(self, pbi: PBI, target: MapKey, proof) -> dict:
        if proof is None:
            raise LinkageInvalid("a contest requires (prev_key, prf_t)")
        prev_key, prf_t = proof
        target_entry = self.state.pins.get(target)
        if target_entry is None:
            raise NoSuchPin(f"no pin at contested key {to_hex(target)}")
        if prev_key == GENESIS_PREV_KEY:
            prev_pin = ZERO_PIN
        else:
            prev_entry = self.state.pins.get(prev_key)
            if prev_entry is None:
                raise NoSuchPin(f"no pin at previous key {to_hex(prev_key)}")
            if prev_entry.contested:
                raise PinAlreadyContested("the previous pin was itself contested")
            prev_pin = prev_entry.pin
        if target_entry.contested:
            raise PinAlreadyContested("the target pin is already contested")
        if derive_map_key(pbi, prev_pin, prf_t) != target:
            raise LinkageInvalid("derived map key does not match the contested key")
        if self.height - target_entry.posted_at >= self.state.config.pin_dispute_period:
            raise DisputeWindowClosed("the pin dispute period has expired")
        return {"prev_key": to_hex(prev_key), "prf_t": to_hex(prf_t)}

    def _check_membership_action(self, record: SidechainRecord, action: Action) -> None:
        present = {
            "add_unmasked": (record.unmasked, False),
            "add_masked": (record.masked, False),
            "remove_unmasked": (record.unmasked, True),
            "remove_masked": (record.masked, True),
        }
        members, must_exist = present[action.kind]
        if (action.target in members) != must_exist:
            raise InvalidAction(f"{action.kind} of {to_hex(action.target)} is a no-op")

    def _sidechain(self, pbi: PBI) -> SidechainRecord:
        record = self.state.sidechains.get(pbi)
        if record is None:
            raise NoSuchSidechain(f"no sidechain {to_hex(pbi)}")
        return record

    def _require_unmasked(self, caller: AccountId, pbi: PBI) -> SidechainRecord:
        record = self.state.sidechains.get(pbi)
        if record is None or caller not in record.unmasked:
            raise NotAuthorized(f"{to_hex(caller)} is not an unmasked participant of {to_hex(pbi)}")
        return record

    def _voting(self, pbi: PBI) -> VotingConfig:
        return self.state.sidechains[pbi].voting

    def _proposal(self, pbi: PBI, proposal_id: int) -> Proposal:
        prop = self.state.proposals.get((pbi, proposal_id))
        if prop is None:
            raise NoSuchProposal(f"no proposal {proposal_id} on {to_hex(pbi)}")
        return prop


def load_events(lines: Iterable[str]) -> list[Event]:
    return [Event.from_json(json.loads(line)) for line in lines if line.strip()]
