"""Deterministic virtual-time simulation of the full query path.

One process plays the gateway and every server; link delays, drops, adversary
actions and all protocol randomness come from generators derived from the
scenario seed, so a scenario replays byte-identically.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from typing import Any

from ..detection import majority_agreement
from ..firewall import (
    PROTOCOL_PRODUCT,
    FirewallState,
    SystemConfig,
    Verdict,
    eval_product_servers,
    eval_sum_server,
    firewall_init,
    gateway_decide,
    insert_rule,
)
from ..sharing.base import SCHEME_ADDITIVE, Share
from ..sharing.engine import PHASE_ONLINE, PHASE_SETUP, ProtocolNetwork
from .adversary import (
    BEHAVIOR_CORRUPT,
    BEHAVIOR_DROP,
    BEHAVIOR_MODIFY_BITS,
    BEHAVIOR_PASSIVE,
    AdversarySpec,
    TimingPolicy,
)

def derive_seed(base: int, *labels: Any) -> int:
    """Stable sub-seed derivation so call order cannot perturb streams."""
    blob = json.dumps([base, *[str(l) for l in labels]]).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


@dataclass
class Scenario:
    config: SystemConfig
    blacklist: list[int]
    probes: list[int]
    seed: int
    adversary: AdversarySpec | None = None
    timing: TimingPolicy = field(default_factory=TimingPolicy)
    inserts: list[int] = field(default_factory=list)
    record_values: bool = True  # include share values in transcript events


@dataclass
class QueryStats:
    addr: int
    m_prime: int
    bits_online: int
    bits_setup: int
    rounds_online: int
    rounds_setup: int
    mult_rounds: int
    messages: int


@dataclass
class SimReport:
    verdicts: list[Verdict]
    stats: list[QueryStats]
    events: list[dict]
    passive_records: dict[int, list[int]]
    detections: list[dict]

    def transcript_jsonl(self) -> str:
        return "\n".join(json.dumps(e, sort_keys=True) for e in self.events) + "\n"

    def transcript_sha256(self) -> str:
        return hashlib.sha256(self.transcript_jsonl().encode()).hexdigest()


class _Log:
    def __init__(self, record_values: bool) -> None:
        self.events: list[dict] = []
        self.record_values = record_values
        self._seq = 0

    def add(self, t: float, ev: str, **fields: Any) -> None:
        entry = {"t": round(t, 6), "seq": self._seq, "ev": ev}
        if not self.record_values:
            fields.pop("values", None)
        entry.update(fields)
        self.events.append(entry)
        self._seq += 1


def _apply_stored_bit_tampering(
    states: list[FirewallState], spec: AdversarySpec, rng: random.Random, log: _Log
) -> None:
    n = states[0].config.scheme.modulus
    for pid, behavior in sorted(spec.behaviors.items()):
        if behavior.kind != BEHAVIOR_MODIFY_BITS:
            continue
        sv = states[pid - 1].shares
        for idx in behavior.indices:
            delta = behavior.delta if behavior.delta is not None else rng.randrange(1, n)
            sv.values[idx] = (sv.values[idx] + delta) % n
        log.add(0.0, "adversary_tamper", party=pid, indices=list(behavior.indices))


def simulate(scenario: Scenario) -> SimReport:
    config = scenario.config
    cfg = config.scheme
    timing = scenario.timing
    adversary = scenario.adversary or AdversarySpec()
    log = _Log(scenario.record_values)
    passive: dict[int, list[int]] = {
        pid: [] for pid, b in adversary.behaviors.items() if b.kind == BEHAVIOR_PASSIVE
    }

    rng_init = random.Random(derive_seed(scenario.seed, "init"))
    rng_links = random.Random(derive_seed(scenario.seed, "links"))
    rng_adv = random.Random(derive_seed(scenario.seed, "adversary"))

    states, digest = firewall_init(scenario.blacklist, config, rng_init)
    log.add(0.0, "init", digest=digest, m=cfg.m, beta=config.bloom.beta)
    _apply_stored_bit_tampering(states, adversary, rng_adv, log)
    for pid in passive:
        passive[pid].extend(states[pid - 1].shares.values)

    for addr in scenario.inserts:
        for state in states:
            insert_rule(addr, state)
        log.add(0.0, "insert", addr=addr, parties=list(cfg.party_ids))

    verdicts: list[Verdict] = []
    stats: list[QueryStats] = []
    detections: list[dict] = []
    t = 1.0
    round_step = timing.link_delay_ms[1]

    for q_index, addr in enumerate(scenario.probes):
        adv_on = adversary.active(q_index)
        window_end = t + config.window_ms
        arrivals: dict[int, float] = {}
        for pid in cfg.party_ids:
            d = timing.sample_delay(rng_links)
            arrivals[pid] = t + d
            log.add(t, "query_sent", query=q_index, addr=addr, dst=pid, bits=32)

        net = ProtocolNetwork(cfg)
        mpc_start = max(arrivals.values())

        def observe(src: int, dst: int, values: list[int], phase: str) -> None:
            mt = mpc_start + net.total_rounds * round_step
            log.add(mt, "mpc", query=q_index, src=src, dst=dst,
                    n=len(values), phase=phase, values=list(values))
            for watcher in passive:
                if watcher in (src, dst):
                    passive[watcher].extend(values)

        net.observer = observe

        mult_rounds = 0
        if config.protocol == PROTOCOL_PRODUCT:
            rng_mpc = random.Random(derive_seed(scenario.seed, "mpc", q_index))
            shares = eval_product_servers(addr, states, net, rng_mpc)
            result_by_pid = {s.party_id: s.value for s in shares}
            ready = mpc_start + net.total_rounds * round_step
            mult_rounds = _tree_levels(config)
        else:
            result_by_pid = {
                st.party_id: eval_sum_server(addr, st).value for st in states
            }
            ready = mpc_start

        responses: list[Share] = []
        sent_by_pid: dict[int, int] = {}
        m_prime_values = 0
        for pid in cfg.party_ids:
            behavior = adversary.behaviors.get(pid)
            value = result_by_pid[pid]
            if behavior is not None and adv_on and behavior.kind == BEHAVIOR_CORRUPT:
                value = (value + adversary.corruption_delta(pid, rng_adv, cfg.modulus)) % cfg.modulus
            sent_by_pid[pid] = value
            dropped = behavior is not None and adv_on and behavior.kind == BEHAVIOR_DROP
            if not dropped and timing.drop_prob > 0:
                dropped = rng_links.random() < timing.drop_prob
            back = max(ready, arrivals[pid]) + timing.sample_delay(rng_links)
            late = back > window_end
            log.add(back, "response", query=q_index, src=pid,
                    dropped=dropped, late=late, values=[value])
            if pid in passive:
                passive[pid].append(value)
            if dropped or late:
                continue
            responses.append(Share(pid, value, cfg.scheme, cfg.modulus))
            m_prime_values += 1
        responses.sort(key=lambda s: s.party_id)

        verdict = gateway_decide(addr, responses, config)

        if config.collective and cfg.scheme != SCHEME_ADDITIVE:
            verdict = _collective_round(
                config, sent_by_pid, net, log, window_end, q_index, verdict,
            )

        bits_online = net.bits[PHASE_ONLINE] + 32 * cfg.m + cfg.share_bits * m_prime_values
        stats.append(QueryStats(
            addr=addr,
            m_prime=len(responses),
            bits_online=bits_online,
            bits_setup=net.bits[PHASE_SETUP],
            rounds_online=net.rounds[PHASE_ONLINE] + 1,  # the query/response cycle
            rounds_setup=net.rounds[PHASE_SETUP],
            mult_rounds=mult_rounds,
            messages=net.messages + cfg.m + m_prime_values,
        ))
        verdicts.append(verdict)
        detections.append({
            "t": round(window_end, 6),
            "addr": addr,
            "m_prime": verdict.m_prime,
            "method": verdict.method,
            "disagreement": verdict.malicious,
            "suspects": sorted(verdict.suspects),
            "decision": verdict.decision,
        })
        log.add(window_end, "verdict", query=q_index, addr=addr,
                decision=verdict.decision, value=verdict.value,
                m_prime=verdict.m_prime, malicious=verdict.malicious,
                suspects=sorted(verdict.suspects), method=verdict.method)
        t = window_end + 1.0

    return SimReport(verdicts, stats, log.events, passive, detections)


def _tree_levels(config: SystemConfig) -> int:
    if config.product_path != "tree":
        return 3  # two mask rounds plus the final unmask multiplication
    k = config.bloom.kappa
    levels = 0
    while k > 1:
        k = (k + 1) // 2
        levels += 1
    return levels


def _collective_round(
    config: SystemConfig,
    broadcast: dict[int, int],
    net: ProtocolNetwork,
    log: _Log,
    t: float,
    q_index: int,
    gateway_verdict: Verdict,
) -> Verdict:
    """Servers exchange the result shares they sent the gateway, decide
    locally, and vote; the agreed decision replaces the gateway-only one.
    Costs m(m-1) extra share values."""
    cfg = config.scheme
    for src in cfg.party_ids:
        for dst in cfg.party_ids:
            if src != dst:
                log.add(t, "result_bcast", query=q_index, src=src, dst=dst,
                        values=[broadcast[src]])
    net.bits[PHASE_ONLINE] += cfg.m * (cfg.m - 1) * cfg.share_bits
    net.messages += cfg.m * (cfg.m - 1)
    all_shares = [Share(pid, v, cfg.scheme, cfg.modulus) for pid, v in sorted(broadcast.items())]
    votes: dict[int, str] = {}
    for pid in cfg.party_ids:
        local = gateway_decide("collective", all_shares, config)
        votes[pid] = local.decision
        log.add(t, "vote", query=q_index, src=pid, decision=local.decision)
    net.bits[PHASE_ONLINE] += cfg.m  # one bit per vote
    decision, dissenters = majority_agreement(votes, config.fail_policy)
    return Verdict(
        decision=decision,
        value=gateway_verdict.value,
        m_prime=gateway_verdict.m_prime,
        malicious=gateway_verdict.malicious or bool(dissenters),
        suspects=gateway_verdict.suspects,
        method="vote",
        note=gateway_verdict.note,
    )
