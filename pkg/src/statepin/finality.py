"""Worst-case finality arithmetic for single-layer and hierarchical pinning.

A pin can be relied on once nobody can still contest it.  For one layer the
contest period is the time to observe the pin, unmask, vote and action the
vote; worst-case finality adds the pinning period on top, since a block
minted right after a pin waits a whole period for the next one.  Layers of a
hierarchy add up.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field


class FinalityError(ValueError):
    pass


class EmptyHierarchy(FinalityError):
    pass


@dataclass(frozen=True)
class LayerParams:
    """Timing of one management chain, in its own blocks.

    ``pinning_period`` is also counted in blocks of this management chain so
    the whole layer shares one ``block_period``.
    """

    observe_depth: int
    unmask_blocks: int
    voting_period: int
    action_blocks: int
    block_period: int
    pinning_period: int = 0
    mode: str = "probabilistic"
    name: str = ""

    def __post_init__(self):
        for fname in ("observe_depth", "unmask_blocks", "voting_period", "action_blocks",
                      "block_period", "pinning_period"):
            value = getattr(self, fname)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise FinalityError(f"{fname} must be a non-negative integer, got {value!r}")
        if self.mode not in ("probabilistic", "instant"):
            raise FinalityError(f"unknown finality mode {self.mode!r}")
        if self.mode == "probabilistic" and self.voting_period < self.observe_depth + 1:
            raise FinalityError(
                f"voting_period {self.voting_period} is shorter than observe_depth + 1 "
                f"({self.observe_depth + 1}); late voters would miss the vote")

    @classmethod
    def mainnet(cls, pinning_period: int = 0, voting_period: int = 7) -> "LayerParams":
        return cls(6, 1, voting_period, 1, 15, pinning_period, "probabilistic", "mainnet")

    @classmethod
    def ibft(cls, pinning_period: int = 0, block_period: int = 2,
             voting_period: int = 2) -> "LayerParams":
        return cls(1, 1, voting_period, 1, block_period, pinning_period, "instant", "ibft")


def contest_period(layer: LayerParams) -> int:
    """Blocks needed to see, unmask, vote on and action a contest."""
    return layer.observe_depth + layer.unmask_blocks + layer.voting_period + layer.action_blocks


def contest_period_seconds(layer: LayerParams) -> int:
    if layer.block_period <= 0:
        raise FinalityError("block_period must be positive to convert to seconds")
    return contest_period(layer) * layer.block_period


@dataclass(frozen=True)
class LayerFigures:
    name: str
    contest_blocks: int
    contest_seconds: int
    pinning_blocks: int
    pinning_seconds: int
    worst_case_seconds: int


@dataclass(frozen=True)
class FinalityReport:
    layers: list[LayerFigures] = field(default_factory=list)
    worst_case_seconds: int = 0
    best_case_seconds: int = 0

    def to_json(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        lines = []
        for i, fig in enumerate(self.layers):
            label = fig.name or f"layer{i}"
            lines.append(
                f"{label}: contest {fig.contest_blocks} blocks / {fig.contest_seconds} s, "
                f"pinning {fig.pinning_blocks} blocks / {fig.pinning_seconds} s, "
                f"worst case {fig.worst_case_seconds} s")
        lines.append(f"total worst case: {self.worst_case_seconds} s")
        lines.append(f"total best case (no pinning wait): {self.best_case_seconds} s")
        return "\n".join(lines)


def hierarchy_finality(layers) -> FinalityReport:
    """Sum of (contest period + pinning period) over layers, in seconds."""
    layers = list(layers)
    if not layers:
        raise EmptyHierarchy("a hierarchy needs at least one layer")
    figures = []
    for layer in layers:
        contest_s = contest_period_seconds(layer)
        pin_s = layer.pinning_period * layer.block_period
        figures.append(LayerFigures(layer.name, contest_period(layer), contest_s,
                                    layer.pinning_period, pin_s, contest_s + pin_s))
    worst = sum(f.worst_case_seconds for f in figures)
    best = sum(f.contest_seconds for f in figures)
    return FinalityReport(figures, worst, best)


def hierarchy_finality_seconds(layers) -> int:
    return hierarchy_finality(layers).worst_case_seconds
