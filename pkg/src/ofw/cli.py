"""Operator command line.

Subcommands: init, serve, gateway, query, insert, simulate, bench. The query
and insert commands are thin HTTP clients of the gateway service; serve and
gateway run the networked roles; init, simulate and bench are local.

Exit codes: 0 success, 2 validation error, 3 connectivity error,
4 protocol or detection failure.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from math import comb
from pathlib import Path

import httpx

from . import bench as bench_mod
from .bloom import derive_params, load_blacklist
from .errors import ConnectivityError, FrameError, OfwError, ProtocolError
from .firewall import MAIN_FILTER, FirewallState, SystemConfig, firewall_init
from .modmath import DEFAULT_MODULUS
from .sharing.base import SchemeConfig
from .sharing.storage import read_share_vector, write_share_vector
from .transport.runtime import Endpoint, ShareServer, TcpGateway
from .transport.scenario import load_scenario
from .transport.sim import simulate

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONNECTIVITY = 3
EXIT_PROTOCOL = 4

SHARE_FILE_TEMPLATE = "party-{pid}.shares"
CONFIG_FILE = "config.json"


def _write_config(path: Path, config: SystemConfig) -> None:
    path.write_text(json.dumps({"config": config.to_dict(), "digest": config.digest()},
                               indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_config(path: Path) -> SystemConfig:
    doc = json.loads(path.read_text(encoding="utf-8"))
    config = SystemConfig.from_dict(doc["config"])
    if doc.get("digest") and doc["digest"] != config.digest():
        raise OfwError(f"config file {path}: digest does not match contents")
    return config


def _parse_server_args(specs: list[str]) -> dict[int, str]:
    endpoints: dict[int, str] = {}
    for spec in specs:
        pid_str, _, ep = spec.partition("=")
        if not ep:
            raise OfwError(f"--server needs id=host:port, got {spec!r}")
        endpoints[int(pid_str)] = ep
    return endpoints


def cmd_init(args: argparse.Namespace) -> int:
    blacklist = load_blacklist(args.blacklist)
    eta = args.eta or max(1, len(blacklist))
    params = derive_params(eta, args.fp, seed=args.seed)
    scheme = SchemeConfig(scheme=args.scheme, m=args.m,
                          t=args.t if args.scheme == "shamir" else 0,
                          modulus=args.modulus)
    config = SystemConfig(
        scheme=scheme,
        filters={MAIN_FILTER: params},
        protocol=args.protocol,
        product_path=args.product_path,
        fail_policy=args.fail_policy,
        whitelist=args.whitelist,
        window_ms=args.window_ms,
        collective=args.collective,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    states, digest = firewall_init(blacklist, config, random.Random(args.seed))
    for state in states:
        write_share_vector(out / SHARE_FILE_TEMPLATE.format(pid=state.party_id), state.shares)
    _write_config(out / CONFIG_FILE, config)
    print(f"initialized {len(states)} share files in {out}")
    print(f"beta={params.beta} kappa={params.kappa} digest={digest}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    config = _read_config(Path(args.config))
    sv = read_share_vector(args.share_file)
    if sv.config != config.scheme:
        raise OfwError("share file scheme parameters do not match the config file")
    state = FirewallState(config=config, party_id=sv.party_id,
                          filters={MAIN_FILTER: sv})
    peers = {pid: Endpoint(ep) for pid, ep in _parse_server_args(args.peer or []).items()}
    host, _, port = args.listen.rpartition(":")
    rng = random.Random(args.seed) if args.seed is not None else None
    server = ShareServer(state, host=host or "127.0.0.1", port=int(port), peers=peers,
                         admin_token=args.admin_token, rng=rng)
    server.start()
    print(f"server {sv.party_id} listening on {server.endpoint}")
    try:
        import threading

        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return EXIT_OK


def cmd_gateway(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    config = _read_config(Path(args.config))
    endpoints = _parse_server_args(args.server)
    runtime = TcpGateway(config, endpoints, query_log_path=args.query_log)
    app = create_app(runtime)
    host, _, port = args.listen.rpartition(":")
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    finally:
        runtime.close()
    return EXIT_OK


def _gateway_client(base_url: str) -> httpx.Client:
    return httpx.Client(base_url=base_url, timeout=30.0)


def cmd_query(args: argparse.Namespace) -> int:
    with _gateway_client(args.gateway) as client:
        resp = client.post("/query", json={"addr": args.addr})
    if resp.status_code == 503:
        raise ConnectivityError(resp.json().get("detail", "gateway lost its servers"))
    resp.raise_for_status()
    body = resp.json()
    print(body["decision"].upper())
    if body["malicious"]:
        print(f"malicious activity flagged; suspects: {body['suspects']}", file=sys.stderr)
    if body["note"]:
        print(f"note: {body['note']}", file=sys.stderr)
        return EXIT_PROTOCOL
    return EXIT_OK


def cmd_insert(args: argparse.Namespace) -> int:
    if not args.gateway and not (args.server and args.config):
        raise OfwError("insert needs --gateway, or --server plus --config for direct mode")
    if args.gateway:
        with _gateway_client(args.gateway) as client:
            resp = client.post("/insert", json={"addr": args.addr,
                                                "admin_token": args.admin_token})
        if resp.status_code == 503:
            raise ConnectivityError(resp.json().get("detail", "gateway lost its servers"))
        if resp.status_code == 403:
            print("insert rejected: bad admin token", file=sys.stderr)
            return EXIT_VALIDATION
        resp.raise_for_status()
        body = resp.json()
    else:
        config = _read_config(Path(args.config))
        endpoints = _parse_server_args(args.server)
        gw = TcpGateway(config, endpoints)
        try:
            body = gw.insert(args.addr, args.admin_token)
        finally:
            gw.close()
    if not body["ok"]:
        print(f"insert failed: {body.get('detail', '')}", file=sys.stderr)
        return EXIT_PROTOCOL
    print(f"inserted on parties {body['parties']}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    report = simulate(scenario)
    cfg = scenario.config.scheme
    for i, (verdict, stat) in enumerate(zip(report.verdicts, report.stats)):
        combos = comb(verdict.m_prime, cfg.t) if cfg.scheme == "shamir" and verdict.m_prime >= cfg.t else 1
        line = (f"query {i}: addr={stat.addr} -> {verdict.decision.upper()} "
                f"(m'={verdict.m_prime}, {combos} combinations, method={verdict.method}")
        if verdict.suspects:
            line += ", suspect: " + ", ".join(f"P{p}" for p in sorted(verdict.suspects))
        line += ")"
        print(line)
    blocked = sum(1 for v in report.verdicts if v.decision == "block")
    flagged = sum(1 for v in report.verdicts if v.malicious)
    print(f"{len(report.verdicts)} queries: {blocked} blocked, "
          f"{len(report.verdicts) - blocked} forwarded, {flagged} flagged")
    print(f"transcript sha256: {report.transcript_sha256()}")
    if args.transcript:
        Path(args.transcript).write_text(report.transcript_jsonl(), encoding="utf-8")
        print(f"transcript written to {args.transcript}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    import csv

    rows = bench_mod.SWEEPS[args.sweep](seed=args.seed)
    out = Path(args.out)
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["axis", "value", "runtime_ns", "bytes", "rounds"])
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ofw", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="build and share a filter from a blacklist file")
    p.add_argument("--blacklist", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scheme", choices=["shamir", "additive"], default="shamir")
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--modulus", type=int, default=DEFAULT_MODULUS)
    p.add_argument("--eta", type=int, default=None, help="expected element count (default: blacklist size)")
    p.add_argument("--fp", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--protocol", choices=["sum", "product"], default="sum")
    p.add_argument("--product-path", choices=["tree", "fanin"], default="tree")
    p.add_argument("--fail-policy", choices=["closed", "open"], default="closed")
    p.add_argument("--whitelist", action="store_true")
    p.add_argument("--window-ms", type=float, default=250.0)
    p.add_argument("--collective", action="store_true")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("serve", help="run one share server")
    p.add_argument("--share-file", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--listen", required=True, help="host:port")
    p.add_argument("--peer", action="append", help="id=host:port, repeatable")
    p.add_argument("--admin-token", default="")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("gateway", help="run the gateway HTTP service")
    p.add_argument("--config", required=True)
    p.add_argument("--server", action="append", required=True, help="id=host:port, repeatable")
    p.add_argument("--listen", default="127.0.0.1:8080")
    p.add_argument("--query-log", default=None)
    p.set_defaults(func=cmd_gateway)

    p = sub.add_parser("query", help="ask the gateway about one address")
    p.add_argument("--gateway", required=True, help="gateway base URL")
    p.add_argument("addr")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("insert", help="add an address to the shared filter")
    p.add_argument("--gateway", default=None, help="gateway base URL")
    p.add_argument("--server", action="append", help="id=host:port (direct mode)")
    p.add_argument("--config", default=None, help="config.json (direct mode)")
    p.add_argument("--admin-token", required=True)
    p.add_argument("addr")
    p.set_defaults(func=cmd_insert)

    p = sub.add_parser("simulate", help="run a scenario file deterministically")
    p.add_argument("scenario")
    p.add_argument("--transcript", default=None, help="write JSON-lines transcript here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="run a performance sweep and write CSV")
    p.add_argument("--sweep", choices=sorted(bench_mod.SWEEPS), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConnectivityError as exc:
        print(f"connectivity error: {exc}", file=sys.stderr)
        return EXIT_CONNECTIVITY
    except (ProtocolError,) as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (OfwError, FrameError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except httpx.HTTPError as exc:
        print(f"connectivity error: {exc}", file=sys.stderr)
        return EXIT_CONNECTIVITY


if __name__ == "__main__":
    sys.exit(main())
