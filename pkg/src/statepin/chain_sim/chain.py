"""Block headers and simulated chains."""

from __future__ import annotations

import bisect

from dataclasses import dataclass, field
from typing import Iterable, Optional

from statepin.crypto_core import ZERO_DIGEST, Digest256, keccak256, to_hex


class InvalidHeight(ValueError):
    pass


def header_hash(parent_hash: Digest256, tx_root: Digest256, number: int) -> Digest256:
    return keccak256(parent_hash + tx_root + number.to_bytes(8, "big"))


@dataclass(frozen=True)
class BlockHeader:
    number: int
    parent_hash: Digest256
    tx_root: Digest256
    hash: Digest256

    @classmethod
    def build(cls, number: int, parent_hash: Digest256, tx_root: Digest256) -> "BlockHeader":
        return cls(number, parent_hash, tx_root, header_hash(parent_hash, tx_root, number))

    def to_json(self) -> dict:
        return {"number": self.number, "parent_hash": to_hex(self.parent_hash),
                "tx_root": to_hex(self.tx_root), "hash": to_hex(self.hash)}


@dataclass
class ChainNode:
    """A simulated blockchain.

    ``finality_mode`` is ``"probabilistic"`` (reads trusted ``confirm_depth``
    blocks behind the tip) or ``"instant"`` (BFT-style, the tip is final).
    """

    chain_id: str
    block_period: int = 15
    ticks_per_block: int = 1
    finality_mode: str = "probabilistic"
    confirm_depth: int = 6
    headers: list = field(default_factory=list)
    mint_ticks: list = field(default_factory=list)

    def __post_init__(self):
        if self.finality_mode not in ("probabilistic", "instant"):
            raise ValueError(f"unknown finality mode {self.finality_mode!r}")
        if self.confirm_depth < 0:
            raise ValueError("confirm_depth must be >= 0")
        if self.ticks_per_block < 1:
            raise ValueError("ticks_per_block must be >= 1")
        if self.block_period <= 0:
            raise ValueError("block_period must be positive")

    @property
    def height(self) -> int:
        return len(self.headers) - 1

    @property
    def tip(self) -> Optional[BlockHeader]:
        return self.headers[-1] if self.headers else None

    @property
    def time(self) -> int:
        """Simulated seconds elapsed since genesis."""
        return max(self.height, 0) * self.block_period

    def mint_block(self, tx_root: Digest256, tick: Optional[int] = None) -> BlockHeader:
        parent = self.tip.hash if self.headers else ZERO_DIGEST
        header = BlockHeader.build(len(self.headers), parent, tx_root)
        self.headers.append(header)
        self.mint_ticks.append(tick if tick is not None else len(self.mint_ticks) * self.ticks_per_block)
        return header

    def revert_chain(self, to_height: int, new_tx_roots: Iterable[Digest256]) -> None:
        """Drop every block above ``to_height`` and re-mint with ``new_tx_roots``."""
        if not 0 <= to_height < self.height:
            raise InvalidHeight(f"cannot revert to {to_height}; tip is {self.height}")
        ticks = self.mint_ticks[to_height + 1:]
        del self.headers[to_height + 1:]
        del self.mint_ticks[to_height + 1:]
        for i, root in enumerate(new_tx_roots):
            self.mint_block(root, ticks[i] if i < len(ticks) else None)

    def visible_height(self, observer_time: Optional[int] = None) -> int:
        """Height at which reads are trusted, as seen at tick ``observer_time``."""
        tip = self.height if observer_time is None else self.height_at_tick(observer_time)
        if self.finality_mode == "instant":
            return max(tip, 0)
        return max(tip - self.confirm_depth, 0)

    def height_at_tick(self, tick: int) -> int:
        return bisect.bisect_right(self.mint_ticks, tick) - 1

    def hashes(self) -> set:
        return {h.hash for h in self.headers}

    def is_valid(self) -> bool:
        parent = ZERO_DIGEST
        for i, h in enumerate(self.headers):
            if h.number != i or h.parent_hash != parent:
                return False
            if h.hash != header_hash(h.parent_hash, h.tx_root, h.number):
                return False
            parent = h.hash
        return True

    def copy(self, chain_id: Optional[str] = None) -> "ChainNode":
        return ChainNode(chain_id or self.chain_id, self.block_period, self.ticks_per_block,
                         self.finality_mode, self.confirm_depth, list(self.headers),
                         list(self.mint_ticks))


def mint_block(chain: ChainNode, tx_root: Digest256) -> ChainNode:
    chain.mint_block(tx_root)
    return chain


def revert_chain(chain: ChainNode, to_height: int, new_tx_roots) -> ChainNode:
    chain.revert_chain(to_height, new_tx_roots)
    return chain


def visible_height(chain: ChainNode, observer_time: Optional[int] = None) -> int:
    return chain.visible_height(observer_time)
