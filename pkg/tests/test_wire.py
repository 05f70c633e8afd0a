import random
import struct
import zlib

import pytest

from ofw.errors import FrameError
from ofw.transport.wire import (
    ConfigSync,
    ErrorMsg,
    IncompleteFrame,
    Insert,
    InsertAck,
    Query,
    ResultBroadcast,
    ShareResponse,
    Vote,
    decode,
    decode_prefix,
    encode,
)


def random_message(rng):
    kind = rng.randrange(8)
    sid, pid = rng.getrandbits(64), rng.randrange(1 << 16)
    if kind == 0:
        return ConfigSync(sid, pid, rng.getrandbits(256).to_bytes(32, "big"))
    if kind == 1:
        return Query(sid, pid, rng.getrandbits(32))
    if kind == 2:
        return ShareResponse(sid, pid, tuple(rng.getrandbits(63) for _ in range(rng.randrange(5))))
    if kind == 3:
        return Insert(sid, pid, rng.getrandbits(32), "tok" * rng.randrange(4), rng.randrange(2))
    if kind == 4:
        return InsertAck(sid, pid, bool(rng.randrange(2)), "detail" * rng.randrange(3))
    if kind == 5:
        return ResultBroadcast(sid, pid, tuple(rng.getrandbits(63) for _ in range(rng.randrange(4))))
    if kind == 6:
        return Vote(sid, pid, rng.choice(["block", "forward"]), rng.getrandbits(63))
    return ErrorMsg(sid, pid, rng.randrange(1 << 16), "oops" * rng.randrange(3))


class TestFraming:
    def test_query_frame_bytes_exact(self):
        frame = encode(Query(session_id=1, party_id=0, addr=0xC0A80001))
        body = bytes.fromhex("4f465731" "01" "01" "0000000000000001" "0000" "00000004" "c0a80001")
        assert frame[:-4] == body
        assert frame[-4:] == struct.pack(">I", zlib.crc32(body))

    def test_round_trip_randomized(self):
        rng = random.Random(71)
        for _ in range(10_000):
            msg = random_message(rng)
            assert decode(encode(msg)) == msg

    def test_truncation_is_frame_error(self):
        frame = encode(Query(1, 0, 42))
        for cut in (3, 10, len(frame) - 1):
            with pytest.raises(FrameError):
                decode(frame[:cut])

    def test_incomplete_frame_reports_missing(self):
        frame = encode(Query(1, 0, 42))
        with pytest.raises(IncompleteFrame) as exc:
            decode_prefix(frame[:-3])
        assert exc.value.missing == 3

    def test_bad_magic(self):
        frame = bytearray(encode(Query(1, 0, 42)))
        frame[0] ^= 0xFF
        with pytest.raises(FrameError):
            decode(bytes(frame))

    def test_bad_version(self):
        frame = bytearray(encode(Query(1, 0, 42)))
        frame[4] = 9
        with pytest.raises(FrameError):
            decode(bytes(frame))

    def test_corrupted_crc(self):
        frame = bytearray(encode(ShareResponse(7, 2, (11, 22))))
        frame[-1] ^= 0x01
        with pytest.raises(FrameError):
            decode(bytes(frame))

    def test_corrupted_payload(self):
        frame = bytearray(encode(ShareResponse(7, 2, (11, 22))))
        frame[25] ^= 0x40
        with pytest.raises(FrameError):
            decode(bytes(frame))

    def test_trailing_bytes_rejected(self):
        with pytest.raises(FrameError):
            decode(encode(Query(1, 0, 42)) + b"x")

    def test_streaming_decode(self):
        msgs = [Query(1, 0, 5), ShareResponse(1, 3, (9,)), Vote(1, 2, "block", 9)]
        buf = b"".join(encode(m) for m in msgs)
        out = []
        while buf:
            msg, used = decode_prefix(buf)
            out.append(msg)
            buf = buf[used:]
        assert out == msgs
