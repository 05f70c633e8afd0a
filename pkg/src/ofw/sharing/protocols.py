"""Interactive share arithmetic: multiplication, masked fan-in products, trees.

Each protocol is written once, per party, as a round generator (see engine).
The public wrappers at the bottom run all parties in-process and are the API
the rest of the package uses.
"""

from __future__ import annotations

import logging
import random
from functools import lru_cache
from typing import Sequence

from ..errors import ProtocolError, RandomnessError, ShareError
from ..modmath import inv_mod
from .base import (
    SCHEME_ADDITIVE,
    SCHEME_SHAMIR,
    SchemeConfig,
    Share,
    _poly_eval,
    lagrange_at_zero,
)
from .engine import PHASE_ONLINE, PHASE_SETUP, PartyGen, ProtocolNetwork, run_round_protocol

log = logging.getLogger("ofw.sharing")

MAX_INVERTIBLE_RETRIES = 32


@lru_cache(maxsize=256)
def _weights_at_zero(xs: tuple[int, ...], modulus: int) -> tuple[int, ...]:
    return tuple(lagrange_at_zero(xs, modulus))


def spawn_rngs(rng: random.Random, party_ids: Sequence[int]) -> dict[int, random.Random]:
    """Derive one child generator per party, deterministically from the parent."""
    return {pid: random.Random(rng.getrandbits(64)) for pid in sorted(party_ids)}


# ---------------------------------------------------------------------------
# per-party generators
# ---------------------------------------------------------------------------


def shamir_mul_many_party(
    pid: int,
    cfg: SchemeConfig,
    pairs: Sequence[tuple[int, int]],
    rng: random.Random,
    phase: str = PHASE_ONLINE,
) -> PartyGen:
    """Multiply share pairs with one degree-reduction round.

    Every party multiplies its shares locally, the first 2t-1 parties reshare
    the products on fresh degree-(t-1) polynomials, and everyone recombines
    the received points with the interpolation weights for those parties.
    """
    n = cfg.modulus
    resharers = cfg.party_ids[: 2 * cfg.t - 1]
    own: list[int] = []
    out: dict[int, list[int]] = {j: [] for j in cfg.party_ids if j != pid}
    if pid in resharers:
        for a_val, b_val in pairs:
            poly = [a_val * b_val % n] + [rng.randrange(n) for _ in range(cfg.t - 1)]
            for j in cfg.party_ids:
                v = _poly_eval(poly, j, n)
                if j == pid:
                    own.append(v)
                else:
                    out[j].append(v)
    recv = yield (
        {j: vals for j, vals in out.items() if vals},
        frozenset(r for r in resharers if r != pid),
        phase,
    )
    weights = _weights_at_zero(resharers, n)
    results = []
    for idx in range(len(pairs)):
        acc = 0
        for w, i in zip(weights, resharers):
            v = own[idx] if i == pid else recv[i][idx]
            acc = (acc + w * v) % n
        results.append(acc)
    return results


def additive_smm_many_party(
    pid: int,
    cfg: SchemeConfig,
    pairs: Sequence[tuple[int, int]],
    rng: random.Random,
    phase: str = PHASE_ONLINE,
) -> PartyGen:
    """Three-party multiplication of additive shares in two exchange rounds
    plus a local combination round (27 field values on the wire per pair).

    Ring orientation: each party masks for its neighbours; the value sent to a
    neighbour is masked with randomness that neighbour never sees.
    """
    n = cfg.modulus
    if cfg.m != 3:
        raise ProtocolError("additive multiplication is defined for exactly 3 parties")
    nxt = pid % 3 + 1
    prv = (pid - 2) % 3 + 1
    count = len(pairs)
    # round 1: five fresh randoms per pair; [r, s, t] to the next party,
    # [r, s] to the previous one
    r_nxt = [rng.randrange(n) for _ in range(count)]
    s_nxt = [rng.randrange(n) for _ in range(count)]
    t_nxt = [rng.randrange(n) for _ in range(count)]
    r_prv = [rng.randrange(n) for _ in range(count)]
    s_prv = [rng.randrange(n) for _ in range(count)]
    out1: dict[int, list[int]] = {nxt: [], prv: []}
    for i in range(count):
        out1[nxt] += [r_nxt[i], s_nxt[i], t_nxt[i]]
        out1[prv] += [r_prv[i], s_prv[i]]
    recv1 = yield out1, frozenset({nxt, prv}), phase
    # we are "previous" to nxt (2 values per pair) and "next" to prv (3 values)
    r_from_nxt = recv1[nxt][0::2]
    s_from_nxt = recv1[nxt][1::2]
    r_from_prv = recv1[prv][0::3]
    s_from_prv = recv1[prv][1::3]
    t_from_prv = recv1[prv][2::3]
    # round 2: masked inputs; the mask for a destination comes from the third party
    out2: dict[int, list[int]] = {nxt: [], prv: []}
    a_to_nxt, b_to_nxt = [], []
    for i, (u, v) in enumerate(pairs):
        a_to_nxt.append((u + r_from_prv[i]) % n)
        b_to_nxt.append((v + s_from_prv[i]) % n)
        out2[nxt] += [a_to_nxt[i], b_to_nxt[i]]
        out2[prv] += [(u + r_from_nxt[i]) % n, (v + s_from_nxt[i]) % n]
    recv2 = yield out2, frozenset({nxt, prv}), phase
    a_from_nxt = recv2[nxt][0::2]
    b_from_nxt = recv2[nxt][1::2]
    a_from_prv = recv2[prv][0::2]
    b_from_prv = recv2[prv][1::2]
    # round 3: local combination
    yield {}, frozenset(), phase
    results = []
    for i, (u, v) in enumerate(pairs):
        c = (
            u * b_from_nxt[i]
            + u * b_from_prv[i]
            + v * a_from_nxt[i]
            + v * a_from_prv[i]
            - a_to_nxt[i] * b_from_nxt[i]
            - b_to_nxt[i] * a_from_nxt[i]
            + r_nxt[i] * s_prv[i]
            + s_nxt[i] * r_prv[i]
            - t_nxt[i]
            + t_from_prv[i]
        )
        results.append((c + u * v) % n)
    return results


def mul_many_party(
    pid: int,
    cfg: SchemeConfig,
    pairs: Sequence[tuple[int, int]],
    rng: random.Random,
    phase: str = PHASE_ONLINE,
) -> PartyGen:
    if not pairs:
        return []
    if cfg.scheme == SCHEME_SHAMIR:
        return (yield from shamir_mul_many_party(pid, cfg, pairs, rng, phase))
    return (yield from additive_smm_many_party(pid, cfg, pairs, rng, phase))


def reveal_many_party(
    pid: int,
    cfg: SchemeConfig,
    values: Sequence[int],
    phase: str = PHASE_ONLINE,
) -> PartyGen:
    """All-to-all broadcast; every party reconstructs every value."""
    n = cfg.modulus
    others = frozenset(p for p in cfg.party_ids if p != pid)
    recv = yield {p: list(values) for p in others}, others, phase
    if cfg.scheme == SCHEME_ADDITIVE:
        return [
            (values[i] + sum(recv[src][i] for src in recv)) % n for i in range(len(values))
        ]
    ids = cfg.party_ids
    weights = _weights_at_zero(ids, n)
    out = []
    for i in range(len(values)):
        acc = 0
        for w, src in zip(weights, ids):
            v = values[i] if src == pid else recv[src][i]
            acc = (acc + w * v) % n
        out.append(acc)
    return out


def random_shared_many_party(
    pid: int,
    cfg: SchemeConfig,
    count: int,
    rng: random.Random,
    phase: str = PHASE_SETUP,
) -> PartyGen:
    """Jointly sample `count` uniform shared values: every party deals a
    sharing of its own randomness and the sums are the results."""
    n = cfg.modulus
    others = frozenset(p for p in cfg.party_ids if p != pid)
    own: list[int] = []
    out: dict[int, list[int]] = {j: [] for j in others}
    for _ in range(count):
        secret = rng.randrange(n)
        if cfg.scheme == SCHEME_SHAMIR:
            poly = [secret] + [rng.randrange(n) for _ in range(cfg.t - 1)]
            for j in cfg.party_ids:
                v = _poly_eval(poly, j, n)
                if j == pid:
                    own.append(v)
                else:
                    out[j].append(v)
        else:
            parts = [rng.randrange(n) for _ in range(cfg.m - 1)]
            last = (secret - sum(parts)) % n
            vals = dict(zip(cfg.party_ids, [*parts, last]))
            own.append(vals.pop(pid))
            for j, v in vals.items():
                out[j].append(v)
    recv = yield out, others, phase
    return [
        (own[i] + sum(recv[src][i] for src in recv)) % n for i in range(count)
    ]


def random_invertible_pairs_party(
    pid: int,
    cfg: SchemeConfig,
    count: int,
    rng: random.Random,
    phase: str = PHASE_SETUP,
) -> PartyGen:
    """Sample `count` pairs (r, r^-1) of shared nonzero values.

    Mask-and-reveal construction: draw shared r and s, multiply, reveal
    w = r*s, and take r^-1 = w^-1 * s. A zero w discards the pair and retries;
    the retry decision is public, so all parties stay in lockstep.
    """
    n = cfg.modulus
    r_out = [0] * count
    rinv_out = [0] * count
    need = list(range(count))
    attempts = 0
    while need:
        attempts += 1
        if attempts > MAX_INVERTIBLE_RETRIES:
            raise RandomnessError("invertible-pair generation kept drawing zero products")
        k = len(need)
        drawn = yield from random_shared_many_party(pid, cfg, 2 * k, rng, phase)
        rs, ss = drawn[:k], drawn[k:]
        ws = yield from mul_many_party(pid, cfg, list(zip(rs, ss)), rng, phase)
        w_pub = yield from reveal_many_party(pid, cfg, ws, phase)
        still: list[int] = []
        for i, slot in enumerate(need):
            if w_pub[i] == 0:
                still.append(slot)
                continue
            r_out[slot] = rs[i]
            rinv_out[slot] = inv_mod(w_pub[i], n) * ss[i] % n
        need = still
    return r_out, rinv_out


def fanin_product_party(
    pid: int,
    cfg: SchemeConfig,
    elements: Sequence[int],
    rng: random.Random,
) -> PartyGen:
    """Constant-round product of k shared values behind multiplicative masks.

    After the (input-independent) pair setup, the online part is two batched
    multiplication rounds, one reveal round and one final multiplication.
    A zero element makes its masked value reveal as zero; the product is still
    correct but the zero position leaks, which is logged as a warning.
    """
    n = cfg.modulus
    k = len(elements)
    r, rinv = yield from random_invertible_pairs_party(pid, cfg, k + 1, rng)
    x = yield from mul_many_party(pid, cfg, [(r[i], elements[i]) for i in range(k)], rng)
    masked = yield from mul_many_party(pid, cfg, [(x[i], rinv[i + 1]) for i in range(k)], rng)
    masked_pub = yield from reveal_many_party(pid, cfg, masked)
    zero_positions = [i for i, v in enumerate(masked_pub) if v == 0]
    if zero_positions and pid == cfg.party_ids[0]:
        log.warning(
            "fan-in product leaked %d zero factor position(s): %s",
            len(zero_positions),
            zero_positions,
        )
    s_prime = 1
    for v in masked_pub:
        s_prime = s_prime * v % n
    unmask = yield from mul_many_party(pid, cfg, [(rinv[0], r[k])], rng)
    return s_prime * unmask[0] % n


def tree_product_party(
    pid: int,
    cfg: SchemeConfig,
    elements: Sequence[int],
    rng: random.Random,
) -> PartyGen:
    """Balanced pairwise product: ceil(log2 k) batched multiplication rounds,
    no intermediate reveals, correct for zero elements."""
    level = list(elements)
    while len(level) > 1:
        pairs = [(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        prods = yield from mul_many_party(pid, cfg, pairs, rng)
        if len(level) % 2:
            prods.append(level[-1])
        level = prods
    return level[0]


# ---------------------------------------------------------------------------
# in-process wrappers (one full sharing per argument, all parties simulated)
# ---------------------------------------------------------------------------


def _party_values(shares: Sequence[Share], cfg: SchemeConfig) -> dict[int, int]:
    by_id: dict[int, int] = {}
    for s in shares:
        if s.scheme != cfg.scheme or s.modulus != cfg.modulus:
            raise ShareError("share scheme or modulus does not match the configuration")
        if s.party_id in by_id:
            raise ShareError(f"duplicate share for party {s.party_id}")
        by_id[s.party_id] = s.value
    if set(by_id) != set(cfg.party_ids):
        raise ShareError("protocol needs exactly one share per party")
    return by_id


def _wrap(values: dict[int, int], cfg: SchemeConfig) -> list[Share]:
    return [Share(pid, values[pid], cfg.scheme, cfg.modulus) for pid in cfg.party_ids]


def _rng_or_default(rng: random.Random | None) -> random.Random:
    return rng if rng is not None else random.Random(random.SystemRandom().getrandbits(64))


def shamir_mul(
    a_shares: Sequence[Share],
    b_shares: Sequence[Share],
    cfg: SchemeConfig,
    network: ProtocolNetwork,
    rng: random.Random | None = None,
) -> list[Share]:
    """Shares of a*b via local products plus one degree-reduction round."""
    if cfg.scheme != SCHEME_SHAMIR:
        raise ProtocolError("shamir_mul needs a shamir configuration")
    cfg.require_multiplication()
    a = _party_values(a_shares, cfg)
    b = _party_values(b_shares, cfg)
    rngs = spawn_rngs(_rng_or_default(rng), cfg.party_ids)
    res = run_round_protocol(
        cfg,
        lambda pid: shamir_mul_many_party(pid, cfg, [(a[pid], b[pid])], rngs[pid]),
        network,
    )
    return _wrap({pid: vals[0] for pid, vals in res.items()}, cfg)


def additive_smm(
    u_shares: Sequence[Share],
    v_shares: Sequence[Share],
    cfg: SchemeConfig,
    network: ProtocolNetwork,
    rng: random.Random | None = None,
) -> list[Share]:
    """Three-party additive multiplication (27 field values, 3 rounds)."""
    if cfg.scheme != SCHEME_ADDITIVE or cfg.m != 3:
        raise ProtocolError("additive_smm runs with exactly 3 additive parties")
    u = _party_values(u_shares, cfg)
    v = _party_values(v_shares, cfg)
    rngs = spawn_rngs(_rng_or_default(rng), cfg.party_ids)
    res = run_round_protocol(
        cfg,
        lambda pid: additive_smm_many_party(pid, cfg, [(u[pid], v[pid])], rngs[pid]),
        network,
    )
    return _wrap({pid: vals[0] for pid, vals in res.items()}, cfg)


def random_shared_invertible_pair(
    cfg: SchemeConfig,
    network: ProtocolNetwork,
    rng: random.Random | None = None,
) -> tuple[list[Share], list[Share]]:
    cfg.require_multiplication()
    rngs = spawn_rngs(_rng_or_default(rng), cfg.party_ids)
    res = run_round_protocol(
        cfg,
        lambda pid: random_invertible_pairs_party(pid, cfg, 1, rngs[pid]),
        network,
    )
    r = _wrap({pid: vals[0][0] for pid, vals in res.items()}, cfg)
    rinv = _wrap({pid: vals[1][0] for pid, vals in res.items()}, cfg)
    return r, rinv


def _elementwise_views(
    element_shares: Sequence[Sequence[Share]], cfg: SchemeConfig
) -> dict[int, list[int]]:
    views: dict[int, list[int]] = {pid: [] for pid in cfg.party_ids}
    for shares in element_shares:
        by_id = _party_values(shares, cfg)
        for pid in cfg.party_ids:
            views[pid].append(by_id[pid])
    return views


def fanin_product(
    element_shares: Sequence[Sequence[Share]],
    cfg: SchemeConfig,
    network: ProtocolNetwork,
    rng: random.Random | None = None,
) -> list[Share]:
    """Shares of the k-fold product via the masked constant-round protocol."""
    if not element_shares:
        raise ProtocolError("fan-in product needs at least one element")
    cfg.require_multiplication()
    views = _elementwise_views(element_shares, cfg)
    rngs = spawn_rngs(_rng_or_default(rng), cfg.party_ids)
    res = run_round_protocol(
        cfg,
        lambda pid: fanin_product_party(pid, cfg, views[pid], rngs[pid]),
        network,
    )
    return _wrap(res, cfg)


def tree_product(
    element_shares: Sequence[Sequence[Share]],
    cfg: SchemeConfig,
    network: ProtocolNetwork,
    rng: random.Random | None = None,
) -> list[Share]:
    """Shares of the k-fold product via pairwise multiplications (zero-safe)."""
    if not element_shares:
        raise ProtocolError("tree product needs at least one element")
    cfg.require_multiplication()
    views = _elementwise_views(element_shares, cfg)
    rngs = spawn_rngs(_rng_or_default(rng), cfg.party_ids)
    res = run_round_protocol(
        cfg,
        lambda pid: tree_product_party(pid, cfg, views[pid], rngs[pid]),
        network,
    )
    return _wrap(res, cfg)
