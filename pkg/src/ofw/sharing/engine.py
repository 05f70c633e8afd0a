"""Round-synchronous execution of per-party protocol generators.

A protocol party is a generator that yields ``(outgoing, expects, phase)`` per
communication round, where ``outgoing`` maps peer id -> list of field values,
``expects`` is the set of peers it must hear from that round, and ``phase``
labels the round ("setup" for input-independent preprocessing, "online"
otherwise). The generator's return value is the party's protocol output.

The same generators run in-process (here, for simulation and tests, with exact
traffic accounting) and over sockets (transport.runtime pumps a single party).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Generator, Iterable

from ..errors import ProtocolError
from .base import SchemeConfig

PHASE_SETUP = "setup"
PHASE_ONLINE = "online"

# yield type of a protocol party
RoundYield = tuple[dict[int, list[int]], frozenset[int], str]
PartyGen = Generator[RoundYield, dict[int, list[int]], Any]


@dataclass
class ProtocolNetwork:
    """Counts protocol-payload traffic and routes one round of messages.

    Bits are counted per the usual accounting: one field value costs
    ``share_bits`` bits; framing is never included.
    """

    cfg: SchemeConfig
    bits: dict[str, int] = field(default_factory=lambda: {PHASE_SETUP: 0, PHASE_ONLINE: 0})
    rounds: dict[str, int] = field(default_factory=lambda: {PHASE_SETUP: 0, PHASE_ONLINE: 0})
    values_per_round: list[int] = field(default_factory=list)
    messages: int = 0
    observer: Callable[[int, int, list[int], str], None] | None = None

    @property
    def total_bits(self) -> int:
        return sum(self.bits.values())

    @property
    def total_rounds(self) -> int:
        return sum(self.rounds.values())

    def deliver_round(
        self, outgoing: dict[int, dict[int, list[int]]], phase: str
    ) -> dict[int, dict[int, list[int]]]:
        """Route {src: {dst: values}} and return {dst: {src: values}}."""
        inboxes: dict[int, dict[int, list[int]]] = {pid: {} for pid in outgoing}
        round_values = 0
        for src, batch in outgoing.items():
            for dst, values in batch.items():
                if dst == src:
                    raise ProtocolError("protocol attempted a self-message")
                if not values:
                    continue
                inboxes.setdefault(dst, {})[src] = list(values)
                round_values += len(values)
                self.messages += 1
                if self.observer is not None:
                    self.observer(src, dst, values, phase)
        self.bits[phase] = self.bits.get(phase, 0) + round_values * self.cfg.share_bits
        self.rounds[phase] = self.rounds.get(phase, 0) + 1
        self.values_per_round.append(round_values)
        return inboxes


def run_round_protocol(
    cfg: SchemeConfig,
    make_party: Callable[[int], PartyGen],
    network: ProtocolNetwork,
    party_ids: Iterable[int] | None = None,
) -> dict[int, Any]:
    """Drive one generator per party in lockstep until all return."""
    ids = tuple(party_ids) if party_ids is not None else cfg.party_ids
    gens = {pid: make_party(pid) for pid in ids}
    results: dict[int, Any] = {}
    pending: dict[int, RoundYield] = {}
    for pid, gen in gens.items():
        try:
            pending[pid] = next(gen)
        except StopIteration as stop:  # zero-round protocol
            results[pid] = stop.value
    if pending and results:
        raise ProtocolError("protocol parties fell out of lockstep")
    while pending:
        phases = {spec[2] for spec in pending.values()}
        if len(phases) != 1:
            raise ProtocolError(f"parties disagree on round phase: {phases}")
        outgoing = {pid: spec[0] for pid, spec in pending.items()}
        inboxes = network.deliver_round(outgoing, phases.pop())
        next_pending: dict[int, RoundYield] = {}
        for pid, spec in pending.items():
            got = inboxes.get(pid, {})
            expected = spec[1]
            if frozenset(got) != expected:
                raise ProtocolError(
                    f"party {pid} expected messages from {sorted(expected)}, got {sorted(got)}"
                )
            try:
                next_pending[pid] = gens[pid].send(got)
            except StopIteration as stop:
                results[pid] = stop.value
        if next_pending and len(next_pending) != len(pending):
            raise ProtocolError("protocol parties fell out of lockstep")
        pending = next_pending
    return results
