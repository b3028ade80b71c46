"""Anonymous state pinning: registry, key derivation, simulator and finality tools."""

from statepin.crypto_core import (
    CONTESTED,
    ChainSecret,
    KeyChain,
    derive_map_key,
    keccak256,
    mask_participant,
    prf_value,
)
from statepin.finality import LayerParams, hierarchy_finality
from statepin.registry import PinRegistry, RegistryConfig, VotingConfig

__version__ = "0.1.0"

__all__ = [
    "CONTESTED", "ChainSecret", "KeyChain", "LayerParams", "PinRegistry", "RegistryConfig",
    "VotingConfig", "derive_map_key", "hierarchy_finality", "keccak256", "mask_participant",
    "prf_value",
]
