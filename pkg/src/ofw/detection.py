"""Malicious-behavior detection: combination reveals, influence bounds,
error-correcting decode of share sets, and cross-server majority voting."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Mapping, Sequence

from .errors import DecodeFailure, ThresholdError
from .modmath import inv_mod
from .sharing.base import Share, interpolate_at_zero

log = logging.getLogger("ofw.detection")


@dataclass(frozen=True)
class RevealTable:
    """Reconstructed value per t-subset of the responding parties."""

    entries: dict[tuple[int, ...], int]

    def values(self) -> list[int]:
        return list(self.entries.values())


@dataclass(frozen=True)
class DetectionReport:
    consensus_value: int | None
    disagreement: bool
    suspects: frozenset[int]
    influenced_count: int
    method: str


def enumerate_reveals(responses: Sequence[Share], t: int) -> RevealTable:
    """Reveal every t-subset of the responses with Lagrange interpolation."""
    if len(responses) < t:
        raise ThresholdError(f"need at least t={t} responses, got {len(responses)}")
    modulus = responses[0].modulus
    points = sorted((s.party_id, s.value) for s in responses)
    entries: dict[tuple[int, ...], int] = {}
    for subset in combinations(points, t):
        key = tuple(p for p, _ in subset)
        entries[key] = interpolate_at_zero(list(subset), modulus)
    return RevealTable(entries)


def analyze(table: RevealTable) -> DetectionReport:
    """Majority analysis of a reveal table.

    The consensus is the strict-majority value when one exists. A suspect is a
    party present in every deviating subset and absent from every
    consensus-valued subset; with a single corrupter this pins the culprit
    exactly, with several it under-identifies rather than accuse honest
    parties.
    """
    if not table.entries:
        raise ThresholdError("empty reveal table")
    counts: dict[int, int] = {}
    for v in table.entries.values():
        counts[v] = counts.get(v, 0) + 1
    best_value, best_count = max(counts.items(), key=lambda kv: kv[1])
    disagreement = len(counts) > 1
    if best_count * 2 <= len(table.entries):
        return DetectionReport(
            consensus_value=None,
            disagreement=True,
            suspects=frozenset(),
            influenced_count=len(table.entries) - best_count,
            method="enumeration",
        )
    if not disagreement:
        return DetectionReport(best_value, False, frozenset(), 0, "enumeration")
    deviating = [k for k, v in table.entries.items() if v != best_value]
    agreeing = [k for k, v in table.entries.items() if v == best_value]
    suspects = set.intersection(*(set(k) for k in deviating))
    for k in agreeing:
        suspects -= set(k)
    return DetectionReport(
        consensus_value=best_value,
        disagreement=True,
        suspects=frozenset(suspects),
        influenced_count=len(deviating),
        method="enumeration",
    )


def influence_count(x: int, m: int, t: int) -> int:
    """Maximum number of t-subsets of m responders touched by x bad parties."""
    if not 0 <= x <= m:
        raise ValueError(f"x must lie in [0, {m}], got {x}")
    return sum(comb(x, i) * comb(m - x, t - i) for i in range(1, min(x, t) + 1))


def correctness_guard(m_prime: int, t: int, x: int) -> bool:
    """True when a strict majority of reveals is guaranteed uninfluenced."""
    return comb(m_prime, t) > 2 * influence_count(x, m_prime, t)


def influence_fraction_minimal(t: int) -> Fraction:
    """Fraction of combinations one bad party influences at m = 2t+1."""
    if t < 2:
        raise ValueError("threshold must be at least 2")
    return Fraction(t, 2 * t + 1)


@dataclass(frozen=True)
class Decoding:
    """Outcome of an error-corrected reconstruction."""

    coefficients: tuple[int, ...]
    error_positions: frozenset[int]

    @property
    def secret(self) -> int:
        return self.coefficients[0] if self.coefficients else 0


def _solve_linear_mod(rows: list[list[int]], rhs: list[int], p: int) -> list[int] | None:
    """One solution of A x = b over Z_p (free variables set to 0), or None."""
    n_rows, n_cols = len(rows), len(rows[0]) if rows else 0
    aug = [row[:] + [rhs[i]] for i, row in enumerate(rows)]
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        pivot = next((i for i in range(r, n_rows) if aug[i][c] % p), None)
        if pivot is None:
            continue
        aug[r], aug[pivot] = aug[pivot], aug[r]
        inv = inv_mod(aug[r][c], p)
        aug[r] = [v * inv % p for v in aug[r]]
        for i in range(n_rows):
            if i != r and aug[i][c] % p:
                f = aug[i][c]
                aug[i] = [(v - f * w) % p for v, w in zip(aug[i], aug[r])]
        pivots.append(c)
        r += 1
        if r == n_rows:
            break
    for i in range(r, n_rows):
        if aug[i][n_cols] % p:
            return None  # inconsistent
    x = [0] * n_cols
    for i, c in enumerate(pivots):
        x[c] = aug[i][n_cols] % p
    return x


def _poly_divmod(num: list[int], den: list[int], p: int) -> tuple[list[int], list[int]]:
    num = num[:]
    while den and den[-1] == 0:
        den = den[:-1]
    quot = [0] * max(len(num) - len(den) + 1, 0)
    inv_lead = inv_mod(den[-1], p)
    for i in range(len(num) - len(den), -1, -1):
        q = num[i + len(den) - 1] * inv_lead % p
        quot[i] = q
        for j, d in enumerate(den):
            num[i + j] = (num[i + j] - q * d) % p
    return quot, [v % p for v in num]


def _poly_eval(coeffs: Sequence[int], x: int, p: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % p
    return acc


def berlekamp_welch(
    points: Sequence[tuple[int, int]],
    t: int,
    e_max: int,
    modulus: int,
) -> Decoding:
    """Recover a degree-(t-1) polynomial from points with up to e_max errors.

    Solves for a monic error locator E (degree e_max) and Q = P*E
    (degree <= t-1+e_max) with Q(x_i) = y_i * E(x_i) at every point, then
    divides. Raises DecodeFailure instead of ever returning an inconsistent
    polynomial.
    """
    m_prime = len(points)
    if e_max < 0 or m_prime < t + 2 * e_max:
        raise DecodeFailure(
            f"{m_prime} points cannot correct {e_max} errors at threshold {t}"
        )
    p = modulus
    if e_max == 0:
        coeffs = _interp_coeffs(points, p)
        if len(coeffs) > t:
            raise DecodeFailure("points do not lie on a polynomial of the expected degree")
        coeffs = coeffs + [0] * (t - len(coeffs))
        return Decoding(tuple(coeffs[:t]), frozenset())
    nq = t + e_max  # number of Q coefficients
    rows, rhs = [], []
    for x, y in points:
        xp = [1]
        for _ in range(nq - 1):
            xp.append(xp[-1] * x % p)
        row = xp[:nq] + [(-y * pow(x, j, p)) % p for j in range(e_max)]
        rows.append(row)
        rhs.append(y * pow(x, e_max, p) % p)
    sol = _solve_linear_mod(rows, rhs, p)
    if sol is None:
        raise DecodeFailure("error-locator system is inconsistent")
    q_coeffs = sol[:nq]
    e_coeffs = sol[nq:] + [1]  # monic of degree e_max
    p_coeffs, remainder = _poly_divmod(q_coeffs, e_coeffs, p)
    if any(remainder):
        raise DecodeFailure("locator does not divide the recovered numerator")
    p_coeffs = (p_coeffs + [0] * t)[: max(t, len(p_coeffs))]
    if any(c % p for c in p_coeffs[t:]):
        raise DecodeFailure("recovered polynomial exceeds the expected degree")
    p_coeffs = [c % p for c in p_coeffs[:t]]
    errors = frozenset(x for x, y in points if _poly_eval(p_coeffs, x, p) != y % p)
    if len(errors) > e_max:
        raise DecodeFailure(f"{len(errors)} points off the recovered polynomial")
    return Decoding(tuple(p_coeffs), errors)


def _interp_coeffs(points: Sequence[tuple[int, int]], p: int) -> list[int]:
    """Full coefficient vector of the interpolating polynomial (Lagrange)."""
    coeffs = [0] * len(points)
    for j, (xj, yj) in enumerate(points):
        basis = [1]
        den = 1
        for k, (xk, _) in enumerate(points):
            if k == j:
                continue
            # multiply basis by (x - xk)
            nxt = [0] + basis
            basis = [(nxt[i] - xk * (basis[i] if i < len(basis) else 0)) % p
                     for i in range(len(nxt))]
            den = den * (xj - xk) % p
        scale = yj * inv_mod(den, p) % p
        for i, b in enumerate(basis):
            coeffs[i] = (coeffs[i] + scale * b) % p
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs


def majority_agreement(
    decisions: Mapping[int, str],
    fail_policy: str = "closed",
) -> tuple[str, frozenset[int]]:
    """Strict-majority vote over per-server decisions.

    Returns the agreed decision and the dissenting parties; ties fall back to
    the configured fail policy (closed -> block, open -> forward).
    """
    counts: dict[str, int] = {}
    for d in decisions.values():
        counts[d] = counts.get(d, 0) + 1
    best, best_count = max(counts.items(), key=lambda kv: kv[1])
    if best_count * 2 > len(decisions):
        dissenters = frozenset(pid for pid, d in decisions.items() if d != best)
        if dissenters:
            log.info("vote dissenters: %s", sorted(dissenters))
        return best, dissenters
    fallback = "block" if fail_policy == "closed" else "forward"
    log.warning("vote tied across %d servers; applying fail-%s", len(decisions), fail_policy)
    return fallback, frozenset(decisions)
