"""Share construction, reconstruction and the communication-free linear ops."""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..errors import (
    ConfigurationError,
    DomainError,
    ProtocolError,
    ShareError,
    ThresholdError,
)
from ..modmath import DEFAULT_MODULUS, inv_mod, require_prime

SCHEME_SHAMIR = "shamir"
SCHEME_ADDITIVE = "additive"


@dataclass(frozen=True)
class SchemeConfig:
    """Parameters of one sharing instance: scheme, party count, threshold, field."""

    scheme: str
    m: int
    t: int = 0
    modulus: int = DEFAULT_MODULUS

    def __post_init__(self) -> None:
        require_prime(self.modulus)
        if self.scheme == SCHEME_ADDITIVE:
            if self.m < 2:
                raise ConfigurationError("additive sharing needs at least 2 parties")
            # additive reconstruction needs every share: the threshold is m
            if self.t not in (0, self.m):
                raise ConfigurationError("additive sharing fixes t = m")
            object.__setattr__(self, "t", self.m)
        elif self.scheme == SCHEME_SHAMIR:
            if not 2 <= self.t <= self.m:
                raise ConfigurationError(f"shamir needs 2 <= t <= m, got t={self.t} m={self.m}")
        else:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")

    @property
    def share_bits(self) -> int:
        """Bits needed for one share value: ceil(log2 N)."""
        return max(1, (self.modulus - 1).bit_length())

    @property
    def party_ids(self) -> tuple[int, ...]:
        return tuple(range(1, self.m + 1))

    def multiplication_capable(self) -> bool:
        if self.scheme == SCHEME_SHAMIR:
            return self.m >= 2 * self.t - 1
        return self.m == 3

    def require_multiplication(self) -> None:
        if not self.multiplication_capable():
            if self.scheme == SCHEME_SHAMIR:
                raise ProtocolError(
                    f"shamir multiplication needs m >= 2t-1 (m={self.m}, t={self.t})"
                )
            raise ProtocolError(f"additive multiplication supports exactly 3 parties, got {self.m}")

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "m": self.m, "t": self.t, "modulus": self.modulus}

    @classmethod
    def from_dict(cls, d: dict) -> "SchemeConfig":
        return cls(scheme=d["scheme"], m=d["m"], t=d["t"], modulus=d["modulus"])


@dataclass(frozen=True)
class Share:
    """One party's share of one secret."""

    party_id: int
    value: int
    scheme: str
    modulus: int

    def __post_init__(self) -> None:
        if not 0 <= self.value < self.modulus:
            raise DomainError(f"share value {self.value} outside [0, {self.modulus})")


@dataclass
class ShareVector:
    """One party's shares of a whole bit vector (the filter slice it stores)."""

    party_id: int
    values: list[int]
    config: SchemeConfig

    def __post_init__(self) -> None:
        n = self.config.modulus
        if any(not 0 <= v < n for v in self.values):
            raise DomainError("share vector contains values outside the field")

    def share_at(self, index: int) -> Share:
        return Share(self.party_id, self.values[index], self.config.scheme, self.config.modulus)


def _poly_eval(coeffs: list[int], x: int, n: int) -> int:
    """Evaluate sum(coeffs[i] * x^i) mod n (constant term first)."""
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % n
    return acc


def shamir_share(
    secret: int,
    cfg: SchemeConfig,
    rng: random.Random,
    coeffs: list[int] | None = None,
) -> list[Share]:
    """Split a secret into m points of a random degree-(t-1) polynomial.

    `coeffs` pins the t-1 non-constant coefficients (test hooks only).
    """
    n = cfg.modulus
    if not 0 <= secret < n:
        raise DomainError(f"secret {secret} outside [0, {n})")
    if cfg.scheme != SCHEME_SHAMIR:
        raise ConfigurationError("shamir_share needs a shamir configuration")
    if coeffs is None:
        coeffs = [rng.randrange(n) for _ in range(cfg.t - 1)]
    elif len(coeffs) != cfg.t - 1:
        raise ShareError(f"expected {cfg.t - 1} coefficients, got {len(coeffs)}")
    poly = [secret, *coeffs]
    return [
        Share(i, _poly_eval(poly, i, n), SCHEME_SHAMIR, n) for i in cfg.party_ids
    ]


def lagrange_at_zero(xs: tuple[int, ...] | list[int], modulus: int) -> list[int]:
    """Interpolation weights at x = 0 for the sample points xs."""
    weights = []
    for j, xj in enumerate(xs):
        num, den = 1, 1
        for k, xk in enumerate(xs):
            if k == j:
                continue
            num = num * (-xk) % modulus
            den = den * (xj - xk) % modulus
        weights.append(num * inv_mod(den, modulus) % modulus)
    return weights


def interpolate_at_zero(points: list[tuple[int, int]], modulus: int) -> int:
    xs = [x for x, _ in points]
    weights = lagrange_at_zero(xs, modulus)
    return sum(w * y for w, (_, y) in zip(weights, points)) % modulus


def shamir_reveal(shares: list[Share], cfg: SchemeConfig) -> int:
    """Reconstruct by Lagrange interpolation at 0 from the supplied points."""
    if len(shares) < cfg.t:
        raise ThresholdError(f"need at least t={cfg.t} shares, got {len(shares)}")
    ids = [s.party_id for s in shares]
    if len(set(ids)) != len(ids):
        raise ShareError("duplicate party_id in share set")
    return interpolate_at_zero([(s.party_id, s.value) for s in shares], cfg.modulus)


def additive_share(
    secret: int,
    cfg: SchemeConfig,
    rng: random.Random,
    firsts: list[int] | None = None,
) -> list[Share]:
    """First m-1 shares uniform, the last closes the sum mod N.

    `firsts` pins the random shares (test hooks only).
    """
    n = cfg.modulus
    if not 0 <= secret < n:
        raise DomainError(f"secret {secret} outside [0, {n})")
    if cfg.scheme != SCHEME_ADDITIVE:
        raise ConfigurationError("additive_share needs an additive configuration")
    if firsts is None:
        firsts = [rng.randrange(n) for _ in range(cfg.m - 1)]
    elif len(firsts) != cfg.m - 1:
        raise ShareError(f"expected {cfg.m - 1} leading shares, got {len(firsts)}")
    last = (secret - sum(firsts)) % n
    values = [*firsts, last]
    return [Share(i, v, SCHEME_ADDITIVE, n) for i, v in zip(cfg.party_ids, values)]


def additive_reveal(shares: list[Share], cfg: SchemeConfig) -> int:
    """Sum of all m shares; the scheme has no threshold below m."""
    ids = {s.party_id for s in shares}
    if ids != set(cfg.party_ids):
        missing = set(cfg.party_ids) - ids
        raise ThresholdError(f"additive reveal needs every share; missing parties {sorted(missing)}")
    return sum(s.value for s in shares) % cfg.modulus


def share_secret(secret: int, cfg: SchemeConfig, rng: random.Random) -> list[Share]:
    if cfg.scheme == SCHEME_SHAMIR:
        return shamir_share(secret, cfg, rng)
    return additive_share(secret, cfg, rng)


def reveal(shares: list[Share], cfg: SchemeConfig) -> int:
    if cfg.scheme == SCHEME_SHAMIR:
        return shamir_reveal(shares, cfg)
    return additive_reveal(shares, cfg)


def _require_compatible(a: Share, b: Share) -> None:
    if a.party_id != b.party_id or a.scheme != b.scheme or a.modulus != b.modulus:
        raise ShareError("shares belong to different parties or schemes")


def local_add(a: Share, b: Share) -> Share:
    """Share of the sum; no communication in either scheme."""
    _require_compatible(a, b)
    return Share(a.party_id, (a.value + b.value) % a.modulus, a.scheme, a.modulus)


def add_const(a: Share, c: int) -> Share:
    """Share of a + c. Under additive sharing only party 1 absorbs the constant."""
    if a.scheme == SCHEME_ADDITIVE and a.party_id != 1:
        return a
    return Share(a.party_id, (a.value + c) % a.modulus, a.scheme, a.modulus)


def mul_const(a: Share, c: int) -> Share:
    """Share of c * a; scaling every share scales the secret in both schemes."""
    return Share(a.party_id, a.value * c % a.modulus, a.scheme, a.modulus)
