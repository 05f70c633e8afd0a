"""Exact modular arithmetic over a prime field and the multiply-add hash family.

Everything here is pure and reentrant; values are plain Python integers so the
multi-party protocols can use the same helpers without wrapper overhead.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError, DomainError, ParameterError

# Largest prime below 2^31; exceeds any practical hash count and keeps every
# intermediate product within 64 bits.
DEFAULT_MODULUS = 2_147_483_647

# Witness set making Miller-Rabin deterministic for all n < 3.3 * 10^24.
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)

MAX_PRIME_SEARCH = 1 << 62

_verified_primes: set[int] = set()


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin primality test (valid for n < 2^64)."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n == p:
            return True
        if n % p == 0:
            return False
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def smallest_prime_geq(n: int) -> int:
    """Smallest prime >= n. Callers wanting "strictly bigger than b" pass b+1."""
    if n < 2:
        raise ParameterError(f"prime search needs n >= 2, got {n}")
    if n > MAX_PRIME_SEARCH:
        raise ParameterError(f"prime search not supported above 2^62, got {n}")
    if n == 2:
        return 2
    c = n if n % 2 else n + 1
    while not is_prime(c):
        c += 2
    return c


def require_prime(n: int) -> int:
    """Validate (and cache) that n is prime, returning it."""
    if n not in _verified_primes:
        if not is_prime(n):
            raise ParameterError(f"modulus {n} is not prime")
        _verified_primes.add(n)
    return n


def inv_mod(a: int, n: int) -> int:
    """Multiplicative inverse of a modulo n via the extended Euclidean algorithm."""
    a %= n
    if a == 0:
        raise DomainError("0 has no multiplicative inverse")
    r0, r1 = n, a
    s0, s1 = 0, 1
    while r1:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    if r0 != 1:
        raise DomainError(f"{a} is not invertible modulo {n}")
    return s0 % n


def universal_hash(x: int, a: int, b: int, q: int, beta: int) -> int:
    """((a*x + b) mod q) mod beta: one member of the universal family."""
    return ((a * x + b) % q) % beta


@dataclass(frozen=True)
class FieldElement:
    """An integer in [0, N) for a prime modulus N."""

    value: int
    modulus: int = DEFAULT_MODULUS

    def __post_init__(self) -> None:
        require_prime(self.modulus)
        if not 0 <= self.value < self.modulus:
            raise DomainError(f"value {self.value} outside [0, {self.modulus})")


def _require_same_modulus(x: FieldElement, y: FieldElement) -> int:
    if x.modulus != y.modulus:
        raise ConfigurationError(f"modulus mismatch: {x.modulus} vs {y.modulus}")
    return x.modulus


def mod_add(x: FieldElement, y: FieldElement) -> FieldElement:
    n = _require_same_modulus(x, y)
    return FieldElement((x.value + y.value) % n, n)


def mod_mul(x: FieldElement, y: FieldElement) -> FieldElement:
    n = _require_same_modulus(x, y)
    return FieldElement(x.value * y.value % n, n)


def mod_inv(x: FieldElement) -> FieldElement:
    return FieldElement(inv_mod(x.value, x.modulus), x.modulus)


@dataclass(frozen=True)
class HashSpec:
    """Parameters of one hash(x) = (a*x + b) mod q; q is a prime exceeding
    both the index range and the hashed universe."""

    a: int
    b: int
    q: int

    def __post_init__(self) -> None:
        require_prime(self.q)
        if not (1 <= self.a < self.q and 1 <= self.b < self.q):
            raise ParameterError(f"hash coefficients must lie in [1, {self.q})")

    def apply(self, x: int, beta: int) -> int:
        return universal_hash(x, self.a, self.b, self.q, beta)
