"""Networked runtime: share servers, gateway client, and an in-process cluster.

The same protocol generators that back the simulator run here; a server pumps
its own party generator and exchanges rounds with its peers over the wire.
Connections carry the plaintext framing by default; a channel cipher hook
(seal/open on whole frames, length-prefixed) is the boundary where real
deployments add transport security.
"""

from __future__ import annotations

import json
import logging
import queue
import random
import socket
import struct
import threading
import time
from dataclasses import dataclass
from typing import Protocol

from .. import bloom
from ..detection import majority_agreement
from ..errors import ConfigurationError, ConnectivityError, FrameError, ProtocolError
from ..firewall import (
    MAIN_FILTER,
    PROTOCOL_PRODUCT,
    FirewallState,
    SystemConfig,
    Verdict,
    canonical_one_share,
    eval_product_servers,
    eval_sum_server,
    gateway_decide,
    insert_rule,
)
from ..sharing.base import Share
from ..sharing.engine import ProtocolNetwork
from ..sharing.protocols import fanin_product_party, tree_product_party
from .adversary import PartyBehavior
from .wire import (
    CRC_LEN,
    HEADER_LEN,
    INSERT_APPLY,
    INSERT_ROLLBACK,
    ConfigSync,
    ErrorMsg,
    Insert,
    InsertAck,
    Query,
    ResultBroadcast,
    ShareResponse,
    Vote,
    WireMessage,
    decode,
    encode,
)

log = logging.getLogger("ofw.transport")

GATEWAY_PARTY = 0


class ChannelCipher(Protocol):
    def seal(self, frame: bytes) -> bytes: ...
    def open(self, blob: bytes) -> bytes: ...


class Endpoint:
    """host:port pair."""

    def __init__(self, spec: str) -> None:
        host, _, port = spec.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigurationError(f"endpoint must be host:port, got {spec!r}")
        self.host, self.port = host, int(port)

    def __str__(self) -> str:
        return f"{self.host}:{self.port}"


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = bytearray()
    while len(chunks) < n:
        part = sock.recv(n - len(chunks))
        if not part:
            raise ConnectionError("peer closed connection")
        chunks += part
    return bytes(chunks)


class Connection:
    """Framed, thread-safe duplex connection."""

    def __init__(self, sock: socket.socket, cipher: ChannelCipher | None = None) -> None:
        self.sock = sock
        self.cipher = cipher
        self._send_lock = threading.Lock()

    def send(self, msg: WireMessage) -> None:
        frame = encode(msg)
        if self.cipher is not None:
            blob = self.cipher.seal(frame)
            frame = struct.pack(">I", len(blob)) + blob
        with self._send_lock:
            self.sock.sendall(frame)

    def recv(self) -> WireMessage:
        if self.cipher is not None:
            (length,) = struct.unpack(">I", _recv_exact(self.sock, 4))
            return decode(self.cipher.open(_recv_exact(self.sock, length)))
        head = _recv_exact(self.sock, HEADER_LEN)
        plen = struct.unpack_from(">I", head, HEADER_LEN - 4)[0]
        rest = _recv_exact(self.sock, plen + CRC_LEN)
        return decode(head + rest)

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


class _PeerMesh:
    """Server-to-server links with per-(session, peer) FIFO inboxes."""

    def __init__(self, server: "ShareServer") -> None:
        self.server = server
        self.out: dict[int, Connection] = {}
        self.inboxes: dict[tuple[int, int], queue.Queue] = {}
        self.lock = threading.Lock()

    def _inbox(self, session_id: int, src: int) -> queue.Queue:
        with self.lock:
            return self.inboxes.setdefault((session_id, src), queue.Queue())

    def deliver(self, msg: ShareResponse | ResultBroadcast) -> None:
        self._inbox(msg.session_id, msg.party_id).put(msg)

    def _connection(self, pid: int) -> Connection:
        with self.lock:
            conn = self.out.get(pid)
        if conn is not None:
            return conn
        ep = self.server.peers.get(pid)
        if ep is None:
            raise ConnectivityError(f"no endpoint configured for peer {pid}")
        sock = socket.create_connection((ep.host, ep.port), timeout=10)
        conn = Connection(sock, self.server.cipher)
        conn.send(ConfigSync(0, self.server.party_id, bytes.fromhex(self.server.digest)))
        with self.lock:
            self.out[pid] = conn
        return conn

    def send(self, pid: int, msg: WireMessage) -> None:
        try:
            self._connection(pid).send(msg)
        except OSError as exc:
            with self.lock:
                self.out.pop(pid, None)
            raise ConnectivityError(f"peer {pid} unreachable: {exc}") from exc

    def exchange(
        self,
        session_id: int,
        outgoing: dict[int, list[int]],
        expects: frozenset[int],
        timeout: float,
    ) -> dict[int, list[int]]:
        for pid, values in outgoing.items():
            if values:
                self.send(pid, ShareResponse(session_id, self.server.party_id, tuple(values)))
        received: dict[int, list[int]] = {}
        deadline = time.monotonic() + timeout
        for src in sorted(expects):
            remain = deadline - time.monotonic()
            if remain <= 0:
                raise ConnectivityError(f"timed out waiting for peer {src}")
            try:
                msg = self._inbox(session_id, src).get(timeout=remain)
            except queue.Empty:
                raise ConnectivityError(f"timed out waiting for peer {src}") from None
            received[src] = list(msg.values)
        return received

    def drop_session(self, session_id: int) -> None:
        with self.lock:
            for key in [k for k in self.inboxes if k[0] == session_id]:
                del self.inboxes[key]

    def close(self) -> None:
        with self.lock:
            for conn in self.out.values():
                conn.close()
            self.out.clear()


class ShareServer:
    """One shareholder: answers queries, joins multiplication sessions,
    applies inserts transactionally."""

    def __init__(
        self,
        state: FirewallState,
        host: str = "127.0.0.1",
        port: int = 0,
        peers: dict[int, Endpoint] | None = None,
        admin_token: str = "",
        cipher: ChannelCipher | None = None,
        session_timeout: float = 10.0,
        rng: random.Random | None = None,
        adversary: "PartyBehavior | None" = None,  # test builds only
    ) -> None:
        self.state = state
        self.party_id = state.party_id
        self.digest = state.config.digest()
        self.peers = peers or {}
        self.admin_token = admin_token
        self.cipher = cipher
        self.session_timeout = session_timeout
        self.rng = rng or random.Random(random.SystemRandom().getrandbits(64))
        self.adversary = adversary
        self.recorded: list[int] = []  # passive_record view
        if adversary is not None and adversary.kind == "modify_stored_bits":
            n = state.config.scheme.modulus
            for j in adversary.indices:
                delta = adversary.delta if adversary.delta is not None \
                    else self.rng.randrange(1, n)
                state.shares.values[j] = (state.shares.values[j] + delta) % n
        self.mesh = _PeerMesh(self)
        self._undo: dict[int, list[tuple[str, int, int]]] = {}
        self._state_lock = threading.RLock()
        self._listener = socket.create_server((host, port))
        self.host, self.port = self._listener.getsockname()[:2]
        self._threads: list[threading.Thread] = []
        self._connections: list[Connection] = []
        self._running = False

    @property
    def endpoint(self) -> str:
        return f"{self.host}:{self.port}"

    def start(self) -> "ShareServer":
        self._running = True
        t = threading.Thread(target=self._accept_loop, daemon=True,
                             name=f"ofw-server-{self.party_id}")
        t.start()
        self._threads.append(t)
        return self

    def stop(self) -> None:
        self._running = False
        try:
            self._listener.close()
        except OSError:
            pass
        for conn in self._connections:
            conn.close()
        self.mesh.close()

    def _accept_loop(self) -> None:
        while self._running:
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            conn = Connection(sock, self.cipher)
            self._connections.append(conn)
            t = threading.Thread(target=self._serve_connection, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def _serve_connection(self, conn: Connection) -> None:
        try:
            while True:
                try:
                    msg = conn.recv()
                except FrameError as exc:
                    log.warning("server %d: frame error: %s", self.party_id, exc)
                    self._try_send(conn, ErrorMsg(0, self.party_id, 400, str(exc)))
                    conn.close()
                    return
                self._dispatch(conn, msg)
        except (ConnectionError, OSError):
            conn.close()

    def _try_send(self, conn: Connection, msg: WireMessage) -> None:
        try:
            conn.send(msg)
        except OSError:
            pass

    def _dispatch(self, conn: Connection, msg: WireMessage) -> None:
        if isinstance(msg, ConfigSync):
            if msg.digest.hex() != self.digest:
                self._try_send(conn, ErrorMsg(msg.session_id, self.party_id, 409,
                                              "config digest mismatch"))
                conn.close()
                raise ConnectionError("config digest mismatch")
            if msg.party_id == GATEWAY_PARTY:  # peers connect write-only
                self._try_send(conn, ConfigSync(msg.session_id, self.party_id,
                                                bytes.fromhex(self.digest)))
        elif isinstance(msg, Query):
            t = threading.Thread(target=self._handle_query, args=(conn, msg), daemon=True)
            t.start()
        elif isinstance(msg, Insert):
            self._handle_insert(conn, msg)
        elif isinstance(msg, (ShareResponse, ResultBroadcast)):
            self.mesh.deliver(msg)
        elif isinstance(msg, ErrorMsg):
            log.warning("server %d received error: %s", self.party_id, msg.message)
        else:
            self._try_send(conn, ErrorMsg(msg.session_id, self.party_id, 422,
                                          f"unexpected message kind {msg.kind}"))

    # -- query handling ------------------------------------------------------

    def _handle_query(self, conn: Connection, msg: Query) -> None:
        config = self.state.config
        try:
            if config.protocol == PROTOCOL_PRODUCT:
                value = self._run_product_session(msg)
            else:
                with self._state_lock:
                    value = eval_sum_server(msg.addr, self.state).value
            if self.adversary is not None:
                if self.adversary.kind == "drop_responses":
                    return
                if self.adversary.kind == "corrupt_share":
                    n = config.scheme.modulus
                    delta = self.adversary.delta
                    value = (value + (delta if delta is not None
                                      else self.rng.randrange(1, n))) % n
            if self.adversary is not None and self.adversary.kind == "passive_record":
                self.recorded.append(value)
            self._try_send(conn, ShareResponse(msg.session_id, self.party_id, (value,)))
            if config.collective:
                self._collective_round(conn, msg, value)
        except (ConnectivityError, ProtocolError) as exc:
            log.warning("server %d session %d failed: %s", self.party_id, msg.session_id, exc)
            self._try_send(conn, ErrorMsg(msg.session_id, self.party_id, 500, str(exc)))
        finally:
            self.mesh.drop_session(msg.session_id)

    def _run_product_session(self, msg: Query) -> int:
        config = self.state.config
        cfg = config.scheme
        cfg.require_multiplication()
        with self._state_lock:
            params = config.bloom
            sv = self.state.shares
            elements = [sv.values[j] for j in bloom.indices(msg.addr, params)]
        session_rng = random.Random(self.rng.getrandbits(64))
        if config.product_path == "fanin":
            gen = fanin_product_party(self.party_id, cfg, elements, session_rng)
        else:
            gen = tree_product_party(self.party_id, cfg, elements, session_rng)
        spec = next(gen)
        while True:
            outgoing, expects, _phase = spec
            received = self.mesh.exchange(msg.session_id, outgoing, expects,
                                          self.session_timeout)
            try:
                spec = gen.send(received)
            except StopIteration as stop:
                return stop.value

    def _collective_round(self, conn: Connection, msg: Query, own_value: int) -> None:
        cfg = self.state.config.scheme
        for pid in cfg.party_ids:
            if pid != self.party_id:
                self.mesh.send(pid, ResultBroadcast(msg.session_id, self.party_id, (own_value,)))
        shares = {self.party_id: own_value}
        deadline = time.monotonic() + self.session_timeout
        for src in cfg.party_ids:
            if src == self.party_id:
                continue
            remain = max(deadline - time.monotonic(), 0.001)
            try:
                peer_msg = self.mesh._inbox(msg.session_id, src).get(timeout=remain)
                shares[src] = peer_msg.values[0]
            except queue.Empty:
                continue
        all_shares = [Share(pid, v, cfg.scheme, cfg.modulus) for pid, v in sorted(shares.items())]
        local = gateway_decide(msg.addr, all_shares, self.state.config)
        self._try_send(conn, Vote(msg.session_id, self.party_id, local.decision,
                                  local.value or 0))

    # -- insert handling -----------------------------------------------------

    def _handle_insert(self, conn: Connection, msg: Insert) -> None:
        if msg.token != self.admin_token:
            self._try_send(conn, InsertAck(msg.session_id, self.party_id, False,
                                           "bad admin token"))
            return
        with self._state_lock:
            if msg.op == INSERT_APPLY:
                sv = self.state.shares
                params = self.state.config.bloom
                one = canonical_one_share(self.state.config.scheme, self.party_id)
                undo = []
                for j in bloom.indices(msg.addr, params):
                    undo.append((MAIN_FILTER, j, sv.values[j]))
                    sv.values[j] = one
                self._undo[msg.session_id] = undo
                self._try_send(conn, InsertAck(msg.session_id, self.party_id, True))
            elif msg.op == INSERT_ROLLBACK:
                for name, j, old in self._undo.pop(msg.session_id, []):
                    self.state.filters[name].values[j] = old
                self._try_send(conn, InsertAck(msg.session_id, self.party_id, True, "rolled back"))
            else:
                self._try_send(conn, InsertAck(msg.session_id, self.party_id, False,
                                               f"unknown insert op {msg.op}"))


class GatewayRuntime(Protocol):
    def query(self, addr: int | str) -> Verdict: ...
    def insert(self, addr: int | str, admin_token: str) -> dict: ...
    def status(self) -> dict: ...
    def close(self) -> None: ...


class _QueryLogMixin:
    query_log_path = None

    def _log_verdict(self, addr: int | str, verdict: Verdict) -> None:
        if self.query_log_path is None:
            return
        entry = {
            "timestamp": time.time(),
            "addr": bloom.int_to_addr(bloom.addr_to_int(addr)),
            "m_prime": verdict.m_prime,
            "method": verdict.method,
            "disagreement": verdict.malicious,
            "suspects": sorted(verdict.suspects),
            "decision": verdict.decision,
        }
        with open(self.query_log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


@dataclass
class _ServerLink:
    pid: int
    conn: Connection
    thread: threading.Thread


class TcpGateway(_QueryLogMixin):
    """Gateway over real sockets: broadcast the query, collect what arrives
    within the window, reconstruct, rule."""

    def __init__(
        self,
        config: SystemConfig,
        endpoints: dict[int, str],
        cipher: ChannelCipher | None = None,
        query_log_path: str | None = None,
        connect_timeout: float = 5.0,
    ) -> None:
        self.config = config
        self.cipher = cipher
        self.query_log_path = query_log_path
        self._session_counter = random.SystemRandom().getrandbits(32) << 16
        self._session_lock = threading.Lock()
        self._responses: dict[int, queue.Queue] = {}
        self._links: dict[int, _ServerLink] = {}
        digest = bytes.fromhex(config.digest())
        for pid, ep_spec in sorted(endpoints.items()):
            ep = Endpoint(ep_spec)
            try:
                sock = socket.create_connection((ep.host, ep.port), timeout=connect_timeout)
            except OSError as exc:
                self.close()
                raise ConnectivityError(f"cannot reach server {pid} at {ep}: {exc}") from exc
            conn = Connection(sock, cipher)
            conn.send(ConfigSync(0, GATEWAY_PARTY, digest))
            reply = conn.recv()
            if isinstance(reply, ErrorMsg):
                self.close()
                raise ConfigurationError(f"server {pid} rejected config: {reply.message}")
            t = threading.Thread(target=self._reader, args=(pid, conn), daemon=True)
            t.start()
            self._links[pid] = _ServerLink(pid, conn, t)

    def _reader(self, pid: int, conn: Connection) -> None:
        while True:
            try:
                msg = conn.recv()
            except (ConnectionError, OSError, FrameError):
                return
            if getattr(msg, "party_id", pid) != pid:
                log.warning("gateway: server %d sent a message claiming party %d",
                            pid, msg.party_id)
            q = self._responses.get(msg.session_id)
            if q is not None:
                q.put((pid, msg))

    def _new_session(self) -> int:
        with self._session_lock:
            self._session_counter += 1
            return self._session_counter

    def query(self, addr: int | str) -> Verdict:
        addr_int = bloom.addr_to_int(addr)
        cfg = self.config.scheme
        session = self._new_session()
        inbox: queue.Queue = queue.Queue()
        self._responses[session] = inbox
        try:
            for pid, link in self._links.items():
                try:
                    link.conn.send(Query(session, GATEWAY_PARTY, addr_int))
                except OSError:
                    log.warning("gateway: server %d unreachable at query time", pid)
            deadline = time.monotonic() + self.config.window_ms / 1000.0
            shares: dict[int, int] = {}
            votes: dict[int, str] = {}
            expected_msgs = len(self._links) * (2 if self.config.collective else 1)
            got = 0
            while got < expected_msgs:
                remain = deadline - time.monotonic()
                if remain <= 0:
                    break
                try:
                    link_pid, msg = inbox.get(timeout=remain)
                except queue.Empty:
                    break
                got += 1
                # attribution follows the authenticated link, not the claim
                if isinstance(msg, ShareResponse) and msg.values:
                    shares[link_pid] = msg.values[0]
                elif isinstance(msg, Vote):
                    votes[link_pid] = msg.decision
            responses = [
                Share(pid, v, cfg.scheme, cfg.modulus) for pid, v in sorted(shares.items())
            ]
            verdict = gateway_decide(addr_int, responses, self.config)
            if self.config.collective and votes:
                decision, dissenters = majority_agreement(votes, self.config.fail_policy)
                verdict = Verdict(decision, verdict.value, verdict.m_prime,
                                  verdict.malicious or bool(dissenters),
                                  verdict.suspects, "vote", verdict.note)
            self._log_verdict(addr_int, verdict)
            return verdict
        finally:
            del self._responses[session]

    def insert(self, addr: int | str, admin_token: str) -> dict:
        """Two-phase: apply everywhere, roll back the successes on any failure."""
        addr_int = bloom.addr_to_int(addr)
        session = self._new_session()
        inbox: queue.Queue = queue.Queue()
        self._responses[session] = inbox
        try:
            sent: list[int] = []
            for pid, link in self._links.items():
                try:
                    link.conn.send(Insert(session, GATEWAY_PARTY, addr_int, admin_token,
                                          INSERT_APPLY))
                    sent.append(pid)
                except OSError:
                    pass
            acked: dict[int, InsertAck] = {}
            deadline = time.monotonic() + max(self.config.window_ms / 1000.0, 2.0)
            while len(acked) < len(sent):
                remain = deadline - time.monotonic()
                if remain <= 0:
                    break
                try:
                    link_pid, msg = inbox.get(timeout=remain)
                except queue.Empty:
                    break
                if isinstance(msg, InsertAck):
                    acked[link_pid] = msg
            ok_parties = [pid for pid, ack in acked.items() if ack.ok]
            all_parties = set(self.config.scheme.party_ids)
            if set(ok_parties) == all_parties:
                return {"ok": True, "parties": sorted(ok_parties)}
            rolled_back = 0
            for pid in ok_parties:
                self._links[pid].conn.send(
                    Insert(session, GATEWAY_PARTY, addr_int, admin_token, INSERT_ROLLBACK)
                )
            rollback_deadline = time.monotonic() + 2.0
            while rolled_back < len(ok_parties):
                remain = rollback_deadline - time.monotonic()
                if remain <= 0:
                    break
                try:
                    _link_pid, msg = inbox.get(timeout=remain)
                except queue.Empty:
                    break
                if isinstance(msg, InsertAck):
                    rolled_back += 1
            failed = sorted(all_parties - set(ok_parties))
            detail = "; ".join(
                f"party {pid}: {ack.detail or 'no detail'}"
                for pid, ack in acked.items() if not ack.ok
            )
            return {"ok": False, "parties": sorted(ok_parties), "failed": failed,
                    "detail": detail or "missing acknowledgements"}
        finally:
            del self._responses[session]

    def status(self) -> dict:
        return {
            "mode": "tcp",
            "servers": {pid: str(link.conn.sock.getpeername()) for pid, link in self._links.items()},
            "digest": self.config.digest(),
            **_config_summary(self.config),
        }

    def close(self) -> None:
        for link in getattr(self, "_links", {}).values():
            link.conn.close()


class InProcessCluster(_QueryLogMixin):
    """All servers in this process; same runtime surface, no sockets."""

    def __init__(
        self,
        states: list[FirewallState],
        admin_token: str = "",
        seed: int | None = None,
        query_log_path: str | None = None,
    ) -> None:
        self.states = states
        self.config = states[0].config
        self.admin_token = admin_token
        self.query_log_path = query_log_path
        self._rng = random.Random(seed if seed is not None
                                  else random.SystemRandom().getrandbits(64))
        self._lock = threading.RLock()
        self.last_network: ProtocolNetwork | None = None

    def query(self, addr: int | str) -> Verdict:
        addr_int = bloom.addr_to_int(addr)
        config = self.config
        with self._lock:
            if config.protocol == PROTOCOL_PRODUCT:
                net = ProtocolNetwork(config.scheme)
                shares = eval_product_servers(addr_int, self.states, net, self._rng)
                self.last_network = net
            else:
                shares = [eval_sum_server(addr_int, st) for st in self.states]
        verdict = gateway_decide(addr_int, shares, config)
        self._log_verdict(addr_int, verdict)
        return verdict

    def insert(self, addr: int | str, admin_token: str) -> dict:
        if admin_token != self.admin_token:
            return {"ok": False, "parties": [], "detail": "bad admin token"}
        addr_int = bloom.addr_to_int(addr)
        with self._lock:
            for state in self.states:
                insert_rule(addr_int, state)
        return {"ok": True, "parties": [st.party_id for st in self.states]}

    def status(self) -> dict:
        return {"mode": "in-process", "digest": self.config.digest(),
                **_config_summary(self.config)}

    def close(self) -> None:
        return None


def _config_summary(config: SystemConfig) -> dict:
    return {
        "scheme": config.scheme.scheme,
        "m": config.scheme.m,
        "t": config.scheme.t,
        "modulus": config.scheme.modulus,
        "protocol": config.protocol,
        "product_path": config.product_path,
        "fail_policy": config.fail_policy,
        "beta": config.bloom.beta,
        "kappa": config.bloom.kappa,
        "window_ms": config.window_ms,
        "collective": config.collective,
    }
