"""Binary wire protocol.

Frame layout (big-endian):
    magic "OFW1" | version u8=1 | kind u8 | session_id u64 | party_id u16
    | payload_len u32 | payload | crc32 u32 over all prior bytes

Payloads:
    CONFIG_SYNC  raw 32-byte config digest
    QUERY        IPv4 address, 4 bytes
    SHARE_RESP   count u16, then count x u64 share values
    INSERT       op u8 (0 apply, 1 rollback) | addr u32 | token_len u16 | token
    INSERT_ACK   ok u8 | detail utf-8
    RESULT_BCAST count u16, then count x u64 share values
    VOTE         decision u8 (1 block, 0 forward) | value u64
    ERROR        code u16 | message utf-8
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

from ..errors import FrameError

MAGIC = b"OFW1"
VERSION = 1

KIND_CONFIG_SYNC = 0
KIND_QUERY = 1
KIND_SHARE_RESP = 2
KIND_INSERT = 3
KIND_INSERT_ACK = 4
KIND_RESULT_BCAST = 5
KIND_VOTE = 6
KIND_ERROR = 7

_HEADER = struct.Struct(">4sBBQHI")
HEADER_LEN = _HEADER.size
CRC_LEN = 4

INSERT_APPLY = 0
INSERT_ROLLBACK = 1


@dataclass(frozen=True)
class ConfigSync:
    session_id: int
    party_id: int
    digest: bytes  # 32 bytes

    kind = KIND_CONFIG_SYNC


@dataclass(frozen=True)
class Query:
    session_id: int
    party_id: int
    addr: int

    kind = KIND_QUERY


@dataclass(frozen=True)
class ShareResponse:
    session_id: int
    party_id: int
    values: tuple[int, ...]

    kind = KIND_SHARE_RESP


@dataclass(frozen=True)
class Insert:
    session_id: int
    party_id: int
    addr: int
    token: str
    op: int = INSERT_APPLY

    kind = KIND_INSERT


@dataclass(frozen=True)
class InsertAck:
    session_id: int
    party_id: int
    ok: bool
    detail: str = ""

    kind = KIND_INSERT_ACK


@dataclass(frozen=True)
class ResultBroadcast:
    session_id: int
    party_id: int
    values: tuple[int, ...]

    kind = KIND_RESULT_BCAST


@dataclass(frozen=True)
class Vote:
    session_id: int
    party_id: int
    decision: str  # "block" | "forward"
    value: int = 0

    kind = KIND_VOTE


@dataclass(frozen=True)
class ErrorMsg:
    session_id: int
    party_id: int
    code: int
    message: str

    kind = KIND_ERROR


WireMessage = (
    ConfigSync | Query | ShareResponse | Insert | InsertAck | ResultBroadcast | Vote | ErrorMsg
)


def _values_payload(values: tuple[int, ...]) -> bytes:
    if len(values) > 0xFFFF:
        raise FrameError(f"too many share values for one frame: {len(values)}")
    return struct.pack(">H", len(values)) + struct.pack(f">{len(values)}Q", *values)


def _parse_values(payload: bytes) -> tuple[int, ...]:
    if len(payload) < 2:
        raise FrameError("share payload too short")
    (count,) = struct.unpack_from(">H", payload)
    if len(payload) != 2 + 8 * count:
        raise FrameError(f"share payload length mismatch for count={count}")
    return struct.unpack_from(f">{count}Q", payload, 2)


def _payload(msg: WireMessage) -> bytes:
    if isinstance(msg, ConfigSync):
        if len(msg.digest) != 32:
            raise FrameError("config digest must be 32 bytes")
        return msg.digest
    if isinstance(msg, Query):
        return struct.pack(">I", msg.addr)
    if isinstance(msg, (ShareResponse, ResultBroadcast)):
        return _values_payload(msg.values)
    if isinstance(msg, Insert):
        token = msg.token.encode()
        return struct.pack(">BIH", msg.op, msg.addr, len(token)) + token
    if isinstance(msg, InsertAck):
        return struct.pack(">B", 1 if msg.ok else 0) + msg.detail.encode()
    if isinstance(msg, Vote):
        return struct.pack(">BQ", 1 if msg.decision == "block" else 0, msg.value)
    if isinstance(msg, ErrorMsg):
        return struct.pack(">H", msg.code) + msg.message.encode()
    raise FrameError(f"cannot encode {type(msg).__name__}")


def encode(msg: WireMessage) -> bytes:
    payload = _payload(msg)
    head = _HEADER.pack(MAGIC, VERSION, msg.kind, msg.session_id, msg.party_id, len(payload))
    body = head + payload
    return body + struct.pack(">I", zlib.crc32(body))


def _decode_payload(kind: int, session_id: int, party_id: int, payload: bytes) -> WireMessage:
    try:
        if kind == KIND_CONFIG_SYNC:
            if len(payload) != 32:
                raise FrameError("config digest must be 32 bytes")
            return ConfigSync(session_id, party_id, payload)
        if kind == KIND_QUERY:
            if len(payload) != 4:
                raise FrameError("query payload must be 4 bytes")
            return Query(session_id, party_id, struct.unpack(">I", payload)[0])
        if kind == KIND_SHARE_RESP:
            return ShareResponse(session_id, party_id, _parse_values(payload))
        if kind == KIND_INSERT:
            op, addr, tlen = struct.unpack_from(">BIH", payload)
            token = payload[7 : 7 + tlen].decode()
            if len(payload) != 7 + tlen:
                raise FrameError("insert payload length mismatch")
            return Insert(session_id, party_id, addr, token, op)
        if kind == KIND_INSERT_ACK:
            return InsertAck(session_id, party_id, payload[0] == 1, payload[1:].decode())
        if kind == KIND_RESULT_BCAST:
            return ResultBroadcast(session_id, party_id, _parse_values(payload))
        if kind == KIND_VOTE:
            flag, value = struct.unpack(">BQ", payload)
            return Vote(session_id, party_id, "block" if flag else "forward", value)
        if kind == KIND_ERROR:
            (code,) = struct.unpack_from(">H", payload)
            return ErrorMsg(session_id, party_id, code, payload[2:].decode())
    except struct.error as exc:
        raise FrameError(f"malformed payload for kind {kind}: {exc}") from exc
    raise FrameError(f"unknown message kind {kind}")


def decode(frame: bytes) -> WireMessage:
    msg, consumed = decode_prefix(frame)
    if consumed != len(frame):
        raise FrameError(f"{len(frame) - consumed} trailing bytes after frame")
    return msg


def decode_prefix(buffer: bytes) -> tuple[WireMessage, int]:
    """Decode one frame from the front of a buffer, returning bytes consumed.

    Raises FrameError on any malformed frame; an incomplete buffer raises
    IncompleteFrame so stream readers can wait for more bytes.
    """
    if len(buffer) < HEADER_LEN:
        raise IncompleteFrame(HEADER_LEN - len(buffer))
    magic, version, kind, session_id, party_id, plen = _HEADER.unpack_from(buffer)
    if magic != MAGIC:
        raise FrameError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FrameError(f"unsupported version {version}")
    total = HEADER_LEN + plen + CRC_LEN
    if len(buffer) < total:
        raise IncompleteFrame(total - len(buffer))
    body = buffer[: HEADER_LEN + plen]
    (crc,) = struct.unpack_from(">I", buffer, HEADER_LEN + plen)
    if zlib.crc32(body) != crc:
        raise FrameError("frame checksum mismatch")
    return _decode_payload(kind, session_id, party_id, bytes(body[HEADER_LEN:])), total


class IncompleteFrame(FrameError):
    """More bytes are needed before the frame can be decoded. Stream readers
    catch this and wait; for a supposedly complete frame it is a frame error."""

    def __init__(self, missing: int) -> None:
        super().__init__(f"need {missing} more bytes")
        self.missing = missing
