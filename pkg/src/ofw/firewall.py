"""Firewall protocols over the shared filter: trusted initialization, sum and
product evaluation, verdict reconstruction, dynamic inserts, composed rules."""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass, field
from math import comb
from typing import Mapping, Sequence

from . import bloom
from .bloom import BloomParams
from .detection import DetectionReport, analyze, berlekamp_welch, correctness_guard, enumerate_reveals
from .errors import ConfigurationError, DecodeFailure
from .sharing.base import (
    SCHEME_ADDITIVE,
    SCHEME_SHAMIR,
    SchemeConfig,
    Share,
    ShareVector,
    share_secret,
)
from .sharing.engine import ProtocolNetwork
from .sharing.protocols import fanin_product, tree_product

log = logging.getLogger("ofw.firewall")

MAIN_FILTER = "main"

PROTOCOL_SUM = "sum"
PROTOCOL_PRODUCT = "product"

# above this many reveal combinations the gateway switches to error-corrected
# decoding instead of enumerating subsets
ENUMERATION_CUTOFF = 10_000


@dataclass(frozen=True)
class SystemConfig:
    """Everything the gateway and all servers must agree on bit-exactly."""

    scheme: SchemeConfig
    filters: dict[str, BloomParams]
    protocol: str = PROTOCOL_SUM
    product_path: str = "tree"  # or "fanin" (leaks zero factor positions)
    fail_policy: str = "closed"  # closed -> drop, open -> forward
    whitelist: bool = False
    window_ms: float = 50.0
    collective: bool = False

    def __post_init__(self) -> None:
        if self.protocol not in (PROTOCOL_SUM, PROTOCOL_PRODUCT):
            raise ConfigurationError(f"unknown protocol {self.protocol!r}")
        if self.product_path not in ("tree", "fanin"):
            raise ConfigurationError(f"unknown product path {self.product_path!r}")
        if self.fail_policy not in ("closed", "open"):
            raise ConfigurationError(f"unknown fail policy {self.fail_policy!r}")
        if MAIN_FILTER not in self.filters:
            raise ConfigurationError(f"config must define the {MAIN_FILTER!r} filter")
        for name, params in self.filters.items():
            if params.kappa >= self.scheme.modulus:
                raise ConfigurationError(
                    f"filter {name!r}: modulus must exceed kappa={params.kappa}"
                )
        if self.protocol == PROTOCOL_PRODUCT:
            self.scheme.require_multiplication()

    @property
    def bloom(self) -> BloomParams:
        return self.filters[MAIN_FILTER]

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.to_dict(),
            "filters": {name: p.to_dict() for name, p in self.filters.items()},
            "protocol": self.protocol,
            "product_path": self.product_path,
            "fail_policy": self.fail_policy,
            "whitelist": self.whitelist,
            "window_ms": self.window_ms,
            "collective": self.collective,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        return cls(
            scheme=SchemeConfig.from_dict(d["scheme"]),
            filters={n: BloomParams.from_dict(p) for n, p in d["filters"].items()},
            protocol=d.get("protocol", PROTOCOL_SUM),
            product_path=d.get("product_path", "tree"),
            fail_policy=d.get("fail_policy", "closed"),
            whitelist=d.get("whitelist", False),
            window_ms=d.get("window_ms", 50.0),
            collective=d.get("collective", False),
        )

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


@dataclass
class FirewallState:
    """One server's slice of the system: its config and its share vectors."""

    config: SystemConfig
    party_id: int
    filters: dict[str, ShareVector] = field(default_factory=dict)

    @property
    def shares(self) -> ShareVector:
        return self.filters[MAIN_FILTER]


@dataclass(frozen=True)
class Verdict:
    decision: str  # "block" | "forward"
    value: int | None
    m_prime: int
    malicious: bool
    suspects: frozenset[int]
    method: str
    note: str = ""


def firewall_init(
    blacklist: Sequence[int | str],
    config: SystemConfig,
    rng: random.Random,
    filter_contents: Mapping[str, Sequence[int | str]] | None = None,
) -> tuple[list[FirewallState], str]:
    """Trusted setup: build the plaintext filter(s), share every bit, discard
    the plaintext. Returns one state per party plus the config digest."""
    contents: dict[str, Sequence[int | str]] = {MAIN_FILTER: blacklist}
    if filter_contents:
        contents.update(filter_contents)
    if set(contents) != set(config.filters):
        raise ConfigurationError("filter contents do not match configured filters")
    cfg = config.scheme
    states = [FirewallState(config=config, party_id=pid) for pid in cfg.party_ids]
    for name, addrs in contents.items():
        params = config.filters[name]
        plain = bloom.build_filter(list(addrs), params)
        vectors: dict[int, list[int]] = {pid: [] for pid in cfg.party_ids}
        for bit in plain.bits:
            for s in share_secret(bit, cfg, rng):
                vectors[s.party_id].append(s.value)
        del plain
        for state in states:
            state.filters[name] = ShareVector(
                party_id=state.party_id, values=vectors[state.party_id], config=cfg
            )
    return states, config.digest()


def eval_sum_server(
    addr: int | str, state: FirewallState, filter_name: str = MAIN_FILTER
) -> Share:
    """Local sum (with multiplicity) of the indexed share values; no traffic."""
    sv = state.filters.get(filter_name)
    if sv is None:
        raise ConfigurationError(f"server {state.party_id} has no filter {filter_name!r}")
    params = state.config.filters[filter_name]
    n = state.config.scheme.modulus
    total = sum(sv.values[j] for j in bloom.indices(addr, params)) % n
    return Share(state.party_id, total, state.config.scheme.scheme, n)


def _indexed_bit_shares(
    addr: int | str, states: Sequence[FirewallState], filter_name: str
) -> list[list[Share]]:
    params = states[0].config.filters[filter_name]
    idx = bloom.indices(addr, params)
    return [[state.filters[filter_name].share_at(j) for state in states] for j in idx]


def eval_product_servers(
    addr: int | str,
    states: Sequence[FirewallState],
    network: ProtocolNetwork,
    rng: random.Random | None = None,
    filter_name: str = MAIN_FILTER,
) -> list[Share]:
    """Shares of the product of the indexed bits, one per server."""
    config = states[0].config
    config.scheme.require_multiplication()
    elements = _indexed_bit_shares(addr, states, filter_name)
    if config.product_path == "fanin":
        return fanin_product(elements, config.scheme, network, rng)
    return tree_product(elements, config.scheme, network, rng)


def _decide_from_value(value: int, config: SystemConfig, mode: str) -> str:
    kappa = config.bloom.kappa
    member = value == (kappa if mode == PROTOCOL_SUM else 1)
    if config.whitelist:
        member = not member
    return "block" if member else "forward"


def _fail_verdict(config: SystemConfig, m_prime: int, method: str, note: str,
                  malicious: bool = False, suspects: frozenset[int] = frozenset(),
                  value: int | None = None) -> Verdict:
    decision = "block" if config.fail_policy == "closed" else "forward"
    return Verdict(decision, value, m_prime, malicious, suspects, method, note)


def gateway_decide(
    addr: int | str,
    responses: Sequence[Share],
    config: SystemConfig,
    mode: str | None = None,
) -> Verdict:
    """Reconstruct the result from the collected responses and rule on it.

    Shamir path: enumerate all t-subsets (or decode with error correction when
    the combination count is prohibitive), flag disagreement, and only trust a
    majority the influence bound says an adversary could not have formed.
    """
    mode = mode or config.protocol
    cfg = config.scheme
    m_prime = len(responses)
    if cfg.scheme == SCHEME_ADDITIVE:
        if m_prime < cfg.m:
            return _fail_verdict(
                config, m_prime, "additive",
                f"additive reveal needs all {cfg.m} shares, got {m_prime}",
            )
        value = sum(s.value for s in responses) % cfg.modulus
        return Verdict(_decide_from_value(value, config, mode), value, m_prime,
                       False, frozenset(), "additive")
    if m_prime < cfg.t:
        return _fail_verdict(
            config, m_prime, "insufficient",
            f"received {m_prime} responses, threshold is {cfg.t}",
        )
    if m_prime == cfg.t:
        table = enumerate_reveals(responses, cfg.t)
        value = next(iter(table.entries.values()))
        log.info("single-combination reveal for %s; detection unavailable", addr)
        if not _value_in_range(value, config, mode):
            return _fail_verdict(config, m_prime, "single",
                                 f"reconstructed value {value} out of range", malicious=True,
                                 value=value)
        return Verdict(_decide_from_value(value, config, mode), value, m_prime,
                       False, frozenset(), "single", "detection unavailable at m'=t")
    if comb(m_prime, cfg.t) <= ENUMERATION_CUTOFF:
        report = analyze(enumerate_reveals(responses, cfg.t))
    else:
        report = _decode_report(responses, cfg)
    if report.consensus_value is None:
        return _fail_verdict(config, m_prime, report.method,
                             "no reconstruction majority", malicious=True,
                             suspects=report.suspects)
    if report.disagreement:
        x_est = max(1, len(report.suspects))
        if not correctness_guard(m_prime, cfg.t, x_est):
            return _fail_verdict(
                config, m_prime, report.method,
                f"majority not trustworthy for x={x_est} at m'={m_prime}",
                malicious=True, suspects=report.suspects, value=report.consensus_value,
            )
    value = report.consensus_value
    if not _value_in_range(value, config, mode):
        return _fail_verdict(config, m_prime, report.method,
                             f"reconstructed value {value} out of range",
                             malicious=True, suspects=report.suspects, value=value)
    return Verdict(
        _decide_from_value(value, config, mode),
        value,
        m_prime,
        report.disagreement,
        report.suspects,
        report.method,
    )


def _value_in_range(value: int, config: SystemConfig, mode: str) -> bool:
    if mode == PROTOCOL_SUM:
        return 0 <= value <= config.bloom.kappa
    return value in (0, 1)


def _decode_report(responses: Sequence[Share], cfg: SchemeConfig) -> DetectionReport:
    points = sorted((s.party_id, s.value) for s in responses)
    e_max = (len(points) - cfg.t) // 2
    try:
        decoding = berlekamp_welch(points, cfg.t, e_max, cfg.modulus)
    except DecodeFailure:
        return DetectionReport(None, True, frozenset(), len(points), "berlekamp-welch")
    return DetectionReport(
        consensus_value=decoding.secret,
        disagreement=bool(decoding.error_positions),
        suspects=decoding.error_positions,
        influenced_count=len(decoding.error_positions),
        method="berlekamp-welch",
    )


def canonical_one_share(cfg: SchemeConfig, party_id: int) -> int:
    """The public sharing of the constant 1 every server agrees on.

    Shamir: the constant polynomial f(x) = 1, so every share is 1. Additive:
    party 1 holds 1 and everyone else 0.
    """
    if cfg.scheme == SCHEME_SHAMIR:
        return 1
    return 1 if party_id == 1 else 0


def insert_rule(
    addr: int | str, state: FirewallState, filter_name: str = MAIN_FILTER
) -> FirewallState:
    """Set the bits addressed by addr to (a sharing of) 1 on this server.

    Replacing the share with the canonical public sharing of 1 realizes
    "old + (1 - old)" coherently across servers: a 0 bit becomes 1, a 1 bit is
    unchanged, and every stored secret stays in {0, 1}. Idempotent and
    order-independent across inserts.
    """
    sv = state.filters.get(filter_name)
    if sv is None:
        raise ConfigurationError(f"server {state.party_id} has no filter {filter_name!r}")
    params = state.config.filters[filter_name]
    one = canonical_one_share(state.config.scheme, state.party_id)
    for j in bloom.indices(addr, params):
        sv.values[j] = one
    return state


def compose_filters(
    addr_fields: Mapping[str, int | str],
    states: Sequence[FirewallState],
    network: ProtocolNetwork,
    rng: random.Random | None = None,
) -> Verdict:
    """Conjunction of several filters: per-filter products, then the product
    of those results. Only the final product ever reaches the gateway, hiding
    which criterion matched or failed."""
    config = states[0].config
    config.scheme.require_multiplication()
    for name in addr_fields:
        if name not in config.filters:
            raise ConfigurationError(f"no filter named {name!r} configured")
    per_filter: list[list[Share]] = []
    for name, addr in sorted(addr_fields.items()):
        elements = _indexed_bit_shares(addr, states, name)
        if config.product_path == "fanin":
            per_filter.append(fanin_product(elements, config.scheme, network, rng))
        else:
            per_filter.append(tree_product(elements, config.scheme, network, rng))
    if len(per_filter) == 1:
        combined = per_filter[0]
    else:
        combined = tree_product(per_filter, config.scheme, network, rng)
    verdict = gateway_decide("composite", combined, config, mode=PROTOCOL_PRODUCT)
    return verdict
