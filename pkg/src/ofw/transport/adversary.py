"""Injected misbehavior and timing models for simulation and test servers."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..errors import ConfigurationError

BEHAVIOR_DROP = "drop_responses"
BEHAVIOR_CORRUPT = "corrupt_share"
BEHAVIOR_MODIFY_BITS = "modify_stored_bits"
BEHAVIOR_PASSIVE = "passive_record"

_BEHAVIORS = (BEHAVIOR_DROP, BEHAVIOR_CORRUPT, BEHAVIOR_MODIFY_BITS, BEHAVIOR_PASSIVE)


@dataclass(frozen=True)
class PartyBehavior:
    """What one corrupted party does.

    corrupt_share: add `delta` (or a random nonzero value when delta is None)
    to every share value it sends back to the gateway.
    modify_stored_bits: add `delta` to the stored shares at `indices` once, at
    scenario start.
    """

    kind: str
    delta: int | None = None
    indices: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _BEHAVIORS:
            raise ConfigurationError(f"unknown adversary behavior {self.kind!r}")


@dataclass(frozen=True)
class AdversarySpec:
    """Per-party misbehavior plus when it applies."""

    behaviors: dict[int, PartyBehavior] = field(default_factory=dict)
    schedule: str | frozenset[int] = "permanent"  # or a set of query indices

    def active(self, query_index: int) -> bool:
        if self.schedule == "permanent":
            return True
        return query_index in self.schedule

    @property
    def corrupt_parties(self) -> frozenset[int]:
        return frozenset(self.behaviors)

    @property
    def x(self) -> int:
        """Number of actively corrupting parties (the detection parameter)."""
        return sum(
            1 for b in self.behaviors.values()
            if b.kind in (BEHAVIOR_CORRUPT, BEHAVIOR_MODIFY_BITS)
        )

    def corruption_delta(self, pid: int, rng: random.Random, modulus: int) -> int:
        b = self.behaviors[pid]
        if b.delta is not None:
            return b.delta % modulus
        return rng.randrange(1, modulus)


@dataclass(frozen=True)
class TimingPolicy:
    """Response window and simulated link behavior."""

    response_window_ms: float = 50.0
    link_delay_ms: tuple[float, float] = (0.5, 2.0)
    drop_prob: float = 0.0

    def __post_init__(self) -> None:
        if self.response_window_ms <= 0:
            raise ConfigurationError("response window must be positive")
        lo, hi = self.link_delay_ms
        if lo < 0 or hi < lo:
            raise ConfigurationError("link delay range must satisfy 0 <= lo <= hi")
        if not 0.0 <= self.drop_prob < 1.0:
            raise ConfigurationError("drop probability must be in [0, 1)")

    def sample_delay(self, rng: random.Random) -> float:
        lo, hi = self.link_delay_ms
        return lo if hi == lo else rng.uniform(lo, hi)
