"""Plaintext Bloom filter: parameter derivation, construction, query, insertion.

The index generator here is the single source of truth for both the plaintext
filter and the secret-shared evaluation path, so the two always agree on which
positions an address touches.
"""

from __future__ import annotations

import ipaddress
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParameterError
from .modmath import HashSpec, smallest_prime_geq

# (1 - p)^kappa at the optimum p = 1/2 collapses the false-positive rate to
# 0.6185^(beta/eta); deriving beta from that matches the usual worked examples.
_FP_BASE = 0.6185

MAX_BETA = 1 << 40

# The hash prime must exceed the hashed universe, not just beta: with q close
# to beta every hash function is a function of x mod q, so two addresses
# congruent mod q collide under ALL hash functions at once and the measured
# false-positive rate degrades to roughly eta/q regardless of kappa.
ADDRESS_SPACE = 1 << 32


def addr_to_int(addr: int | str) -> int:
    """A 32-bit big-endian integer for an IPv4 address (ints pass through)."""
    if isinstance(addr, int):
        if not 0 <= addr < (1 << 32):
            raise ParameterError(f"address {addr} outside 32-bit range")
        return addr
    return int(ipaddress.IPv4Address(addr))


def int_to_addr(x: int) -> str:
    return str(ipaddress.IPv4Address(x))


@dataclass(frozen=True)
class BloomParams:
    """Filter geometry plus the seeded hash family shared by every component."""

    eta: int
    beta: int
    kappa: int
    target_fp: float
    hashes: tuple[HashSpec, ...]
    bit_zero_prob: float = field(default=0.0)

    def __post_init__(self) -> None:
        if self.eta < 1 or self.kappa < 1 or self.beta < self.kappa:
            raise ParameterError(
                f"invalid filter geometry eta={self.eta} beta={self.beta} kappa={self.kappa}"
            )
        if not 0.0 < self.target_fp < 1.0:
            raise ParameterError(f"target_fp must be in (0,1), got {self.target_fp}")
        if len(self.hashes) != self.kappa:
            raise ParameterError("number of hash functions must equal kappa")
        if len({(h.a, h.b) for h in self.hashes}) != self.kappa:
            raise ParameterError("hash (a, b) pairs must be pairwise distinct")

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "beta": self.beta,
            "kappa": self.kappa,
            "target_fp": self.target_fp,
            "bit_zero_prob": self.bit_zero_prob,
            "hashes": [{"a": h.a, "b": h.b, "q": h.q} for h in self.hashes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BloomParams":
        return cls(
            eta=d["eta"],
            beta=d["beta"],
            kappa=d["kappa"],
            target_fp=d["target_fp"],
            bit_zero_prob=d.get("bit_zero_prob", 0.0),
            hashes=tuple(HashSpec(h["a"], h["b"], h["q"]) for h in d["hashes"]),
        )


def derive_params(eta: int, target_fp: float, seed: int) -> BloomParams:
    """Size a filter for an expected element count and false-positive rate.

    beta = ceil(eta * ln(fp) / ln(0.6185)); kappa = round((beta/eta) * ln 2),
    at least 1 (half-up rounding, since the optimum is rarely integral).
    """
    if eta < 1:
        raise ParameterError(f"eta must be >= 1, got {eta}")
    if not 0.0 < target_fp < 1.0:
        raise ParameterError(f"target_fp must be in (0,1), got {target_fp}")
    beta = math.ceil(eta * math.log(target_fp) / math.log(_FP_BASE))
    beta = max(beta, 1)
    if beta > MAX_BETA:
        raise ParameterError(f"target_fp {target_fp} needs beta={beta} > {MAX_BETA}")
    kappa = max(1, math.floor(beta / eta * math.log(2) + 0.5))
    q = smallest_prime_geq(max(beta, ADDRESS_SPACE) + 1)
    rng = random.Random(seed)
    chosen: list[HashSpec] = []
    seen: set[tuple[int, int]] = set()
    while len(chosen) < kappa:
        a, b = rng.randrange(1, q), rng.randrange(1, q)
        if (a, b) in seen:
            continue
        seen.add((a, b))
        chosen.append(HashSpec(a, b, q))
    p_zero = (1.0 - 1.0 / beta) ** (kappa * eta)
    return BloomParams(
        eta=eta,
        beta=beta,
        kappa=kappa,
        target_fp=target_fp,
        hashes=tuple(chosen),
        bit_zero_prob=p_zero,
    )


def indices(addr: int | str, params: BloomParams) -> list[int]:
    """The kappa filter positions for an address, duplicates preserved.

    Evaluation sums or multiplies over all kappa hash outputs with
    multiplicity, so a hash collision cannot break the sigma == kappa
    membership criterion.
    """
    x = addr_to_int(addr)
    return [h.apply(x, params.beta) for h in params.hashes]


@dataclass
class BloomFilter:
    params: BloomParams
    bits: bytearray

    def __post_init__(self) -> None:
        if len(self.bits) != self.params.beta:
            raise ParameterError("bit vector length must equal beta")


def empty_filter(params: BloomParams) -> BloomFilter:
    return BloomFilter(params, bytearray(params.beta))


def insert(filt: BloomFilter, addr: int | str) -> BloomFilter:
    """Set the bits addressed by addr; idempotent, other bits untouched."""
    for j in indices(addr, filt.params):
        filt.bits[j] = 1
    return filt


def build_filter(addrs: list[int | str], params: BloomParams) -> BloomFilter:
    filt = empty_filter(params)
    for addr in addrs:
        insert(filt, addr)
    return filt


def query(filt: BloomFilter, addr: int | str) -> bool:
    """True iff every addressed position is set (membership, maybe-false-positive)."""
    return all(filt.bits[j] for j in indices(addr, filt.params))


def load_blacklist(path: str | Path) -> list[int]:
    """Read a one-address-per-line text file; '#' comments and blanks ignored."""
    addrs: list[int] = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            addrs.append(addr_to_int(line))
    return addrs
