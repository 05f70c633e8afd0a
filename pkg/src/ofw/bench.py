"""Benchmark sweeps: initialization and evaluation runtimes as functions of
filter size, hash count, and party count. Emits rows for CSV output."""

from __future__ import annotations

import random
import time

from .bloom import BloomParams, derive_params
from .firewall import MAIN_FILTER, SystemConfig, eval_sum_server, firewall_init
from .modmath import DEFAULT_MODULUS, HashSpec, smallest_prime_geq
from .sharing.base import SchemeConfig, shamir_reveal


def _time_ns(fn) -> int:
    start = time.perf_counter_ns()
    fn()
    return time.perf_counter_ns() - start


def _forced_kappa_params(beta: int, kappa: int, seed: int) -> BloomParams:
    q = smallest_prime_geq(beta + 1)
    rng = random.Random(seed)
    seen: set[tuple[int, int]] = set()
    hashes = []
    while len(hashes) < kappa:
        a, b = rng.randrange(1, q), rng.randrange(1, q)
        if (a, b) in seen:
            continue
        seen.add((a, b))
        hashes.append(HashSpec(a, b, q))
    return BloomParams(eta=max(1, beta // 8), beta=beta, kappa=kappa,
                       target_fp=0.01, hashes=tuple(hashes))


def bench_init_beta(
    etas: list[int] | None = None, fp: float = 0.01, m: int = 10, t: int = 3, seed: int = 1
) -> list[dict]:
    """Initialization runtime as beta grows (m fixed)."""
    etas = etas or [100, 500, 2_000, 10_000]
    rows = []
    for eta in etas:
        params = derive_params(eta, fp, seed)
        scheme = SchemeConfig("shamir", m=m, t=t, modulus=DEFAULT_MODULUS)
        config = SystemConfig(scheme=scheme, filters={MAIN_FILTER: params})
        rng = random.Random(seed)
        blacklist = [rng.randrange(1 << 32) for _ in range(eta)]
        ns = _time_ns(lambda: firewall_init(blacklist, config, random.Random(seed)))
        rows.append({"axis": "beta", "value": params.beta, "runtime_ns": ns,
                     "bytes": 8 * params.beta * m, "rounds": 0})
    return rows


def bench_init_m(
    ms: list[int] | None = None, eta: int = 1_000, fp: float = 0.01, seed: int = 1
) -> list[dict]:
    """Initialization runtime as the party count grows (beta fixed)."""
    ms = ms or [3, 5, 7, 10, 15, 20]
    params = derive_params(eta, fp, seed)
    rng = random.Random(seed)
    blacklist = [rng.randrange(1 << 32) for _ in range(eta)]
    rows = []
    for m in ms:
        scheme = SchemeConfig("shamir", m=m, t=max(2, (m + 1) // 2), modulus=DEFAULT_MODULUS)
        config = SystemConfig(scheme=scheme, filters={MAIN_FILTER: params})
        ns = _time_ns(lambda: firewall_init(blacklist, config, random.Random(seed)))
        rows.append({"axis": "m", "value": m, "runtime_ns": ns,
                     "bytes": 8 * params.beta * m, "rounds": 0})
    return rows


def _eval_row(config: SystemConfig, states, probes, axis: str, value: int) -> dict:
    """Time the evaluation path: every server's sum plus one reconstruction
    (malicious-detection enumeration is a separate, optional cost)."""
    cfg = config.scheme
    start = time.perf_counter_ns()
    for addr in probes:
        responses = [eval_sum_server(addr, st) for st in states]
        shamir_reveal(responses[: cfg.t], cfg)
    elapsed = (time.perf_counter_ns() - start) // len(probes)
    return {"axis": axis, "value": value, "runtime_ns": elapsed,
            "bytes": (cfg.m * (32 + cfg.share_bits) + 7) // 8, "rounds": 1}


def bench_eval_kappa(
    kappas: list[int] | None = None, m: int = 20, t: int = 3,
    probes: int = 200, seed: int = 1,
) -> list[dict]:
    """Per-query sum-evaluation runtime as the hash count grows (m fixed)."""
    kappas = kappas or list(range(1, 21))
    rng = random.Random(seed)
    rows = []
    for kappa in kappas:
        params = _forced_kappa_params(4096, kappa, seed)
        scheme = SchemeConfig("shamir", m=m, t=t, modulus=DEFAULT_MODULUS)
        config = SystemConfig(scheme=scheme, filters={MAIN_FILTER: params})
        blacklist = [rng.randrange(1 << 32) for _ in range(100)]
        states, _ = firewall_init(blacklist, config, random.Random(seed))
        addrs = [rng.randrange(1 << 32) for _ in range(probes)]
        rows.append(_eval_row(config, states, addrs, "kappa", kappa))
    return rows


def bench_eval_m(
    ms: list[int] | None = None, kappa: int = 10, probes: int = 200, seed: int = 1
) -> list[dict]:
    """Per-query sum-evaluation runtime as the party count grows (kappa fixed)."""
    ms = ms or [3, 5, 7, 10, 15, 20]
    rng = random.Random(seed)
    params = _forced_kappa_params(4096, kappa, seed)
    blacklist = [rng.randrange(1 << 32) for _ in range(100)]
    rows = []
    for m in ms:
        scheme = SchemeConfig("shamir", m=m, t=max(2, (m + 1) // 2), modulus=DEFAULT_MODULUS)
        config = SystemConfig(scheme=scheme, filters={MAIN_FILTER: params})
        states, _ = firewall_init(blacklist, config, random.Random(seed))
        addrs = [rng.randrange(1 << 32) for _ in range(probes)]
        rows.append(_eval_row(config, states, addrs, "m", m))
    return rows


SWEEPS = {
    "init-beta": bench_init_beta,
    "init-m": bench_init_m,
    "eval-kappa": bench_eval_kappa,
    "eval-m": bench_eval_m,
}
