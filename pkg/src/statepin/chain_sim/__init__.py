"""Discrete-event simulation of private chains pinning to management chains."""

from statepin.chain_sim.actors import (
    ParticipantActor,
    Receipt,
    Tx,
    guardian_post_pin,
    watch_and_contest,
)
from statepin.chain_sim.chain import (
    BlockHeader,
    ChainNode,
    InvalidHeight,
    header_hash,
    mint_block,
    revert_chain,
    visible_height,
)
from statepin.chain_sim.simulator import Simulation, SimulationResult, run_simulation
from statepin.chain_sim.topology import (
    ConfigError,
    ManagementChain,
    PinIndex,
    PinLink,
    PinSchedule,
    Topology,
)

__all__ = [
    "BlockHeader", "ChainNode", "ConfigError", "InvalidHeight", "ManagementChain",
    "ParticipantActor", "PinIndex", "PinLink", "PinSchedule", "Receipt", "Simulation",
    "SimulationResult", "Topology", "Tx", "guardian_post_pin", "header_hash", "mint_block",
    "revert_chain", "run_simulation", "visible_height", "watch_and_contest",
]
