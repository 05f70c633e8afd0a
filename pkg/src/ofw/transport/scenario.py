"""Line-oriented scenario files for the simulator.

Format: one `key = value` per line, `#` comments. Repeatable keys: `probe`,
`insert`, `blacklist_addr`, `adversary`. An adversary line is
`party=<id> behavior=<kind> [delta=<int>|random] [indices=i,j,...]`.

Example:
    seed = 42
    scheme = shamir
    m = 7
    t = 3
    eta = 100
    fp = 0.01
    protocol = sum
    window_ms = 50
    blacklist_file = blacklist.txt
    probe = 10.0.0.1
    adversary = party=2 behavior=corrupt_share delta=5
"""

from __future__ import annotations

from pathlib import Path

from ..bloom import addr_to_int, derive_params, load_blacklist
from ..errors import ParameterError
from ..firewall import MAIN_FILTER, SystemConfig
from ..modmath import DEFAULT_MODULUS
from ..sharing.base import SchemeConfig
from .adversary import AdversarySpec, PartyBehavior, TimingPolicy
from .sim import Scenario


def _parse_lines(text: str) -> list[tuple[str, str]]:
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"scenario line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        pairs.append((key.strip().lower(), value.strip()))
    return pairs


def _parse_adversary_line(value: str) -> tuple[int, PartyBehavior]:
    fields = dict(tok.split("=", 1) for tok in value.split())
    if "party" not in fields or "behavior" not in fields:
        raise ParameterError(f"adversary line needs party= and behavior=: {value!r}")
    delta: int | None = None
    if "delta" in fields and fields["delta"] != "random":
        delta = int(fields["delta"])
    indices: tuple[int, ...] = ()
    if "indices" in fields:
        indices = tuple(int(i) for i in fields["indices"].split(",") if i)
    return int(fields["party"]), PartyBehavior(fields["behavior"], delta=delta, indices=indices)


def load_scenario(path: str | Path) -> Scenario:
    pairs = _parse_lines(Path(path).read_text(encoding="utf-8"))
    opts: dict[str, str] = {}
    probes: list[int] = []
    inserts: list[int] = []
    blacklist: list[int] = []
    behaviors: dict[int, PartyBehavior] = {}
    for key, value in pairs:
        if key == "probe":
            probes.append(addr_to_int(value))
        elif key == "insert":
            inserts.append(addr_to_int(value))
        elif key == "blacklist_addr":
            blacklist.append(addr_to_int(value))
        elif key == "adversary":
            pid, behavior = _parse_adversary_line(value)
            behaviors[pid] = behavior
        else:
            opts[key] = value

    seed = int(opts.get("seed", "0"))
    if "blacklist_file" in opts:
        blacklist += load_blacklist(Path(path).parent / opts["blacklist_file"])
    eta = int(opts.get("eta", str(max(1, len(blacklist)))))
    params = derive_params(eta, float(opts.get("fp", "0.01")), seed=seed)
    scheme = SchemeConfig(
        scheme=opts.get("scheme", "shamir"),
        m=int(opts.get("m", "3")),
        t=int(opts.get("t", "2")) if opts.get("scheme", "shamir") == "shamir" else 0,
        modulus=int(opts.get("modulus", str(DEFAULT_MODULUS))),
    )
    config = SystemConfig(
        scheme=scheme,
        filters={MAIN_FILTER: params},
        protocol=opts.get("protocol", "sum"),
        product_path=opts.get("product_path", "tree"),
        fail_policy=opts.get("fail_policy", "closed"),
        whitelist=opts.get("whitelist", "false").lower() == "true",
        window_ms=float(opts.get("window_ms", "50")),
        collective=opts.get("collective", "false").lower() == "true",
    )
    timing = TimingPolicy(
        response_window_ms=config.window_ms,
        link_delay_ms=(
            float(opts.get("link_delay_min_ms", "0.5")),
            float(opts.get("link_delay_max_ms", "2.0")),
        ),
        drop_prob=float(opts.get("drop_prob", "0")),
    )
    schedule: str | frozenset[int] = "permanent"
    if "adversary_queries" in opts:
        schedule = frozenset(int(i) for i in opts["adversary_queries"].split(",") if i)
    adversary = AdversarySpec(behaviors=behaviors, schedule=schedule) if behaviors else None
    record = opts.get("record_values", "true").lower() == "true"
    return Scenario(
        config=config,
        blacklist=blacklist,
        probes=probes,
        seed=seed,
        adversary=adversary,
        timing=timing,
        inserts=inserts,
        record_values=record,
    )
