"""Share-at-rest file format.

Layout (little-endian):
    magic "OFW1" | scheme u8 | m u16 | t u16 | N u64 | party_id u16 | beta u32
    beta x share u64
    crc32 u32 over everything before it
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

from ..errors import FrameError
from .base import SCHEME_ADDITIVE, SCHEME_SHAMIR, SchemeConfig, ShareVector

_HEADER = struct.Struct("<4sBHHQHI")
_MAGIC = b"OFW1"
_SCHEME_CODES = {SCHEME_SHAMIR: 1, SCHEME_ADDITIVE: 2}
_SCHEME_NAMES = {v: k for k, v in _SCHEME_CODES.items()}


def write_share_vector(path: str | Path, sv: ShareVector) -> None:
    cfg = sv.config
    blob = bytearray(
        _HEADER.pack(
            _MAGIC,
            _SCHEME_CODES[cfg.scheme],
            cfg.m,
            cfg.t,
            cfg.modulus,
            sv.party_id,
            len(sv.values),
        )
    )
    blob += struct.pack(f"<{len(sv.values)}Q", *sv.values)
    blob += struct.pack("<I", zlib.crc32(bytes(blob)))
    Path(path).write_bytes(bytes(blob))


def read_share_vector(path: str | Path) -> ShareVector:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size + 4:
        raise FrameError(f"share file {path} truncated")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise FrameError(f"share file {path} failed its integrity check")
    magic, scheme_code, m, t, modulus, party_id, beta = _HEADER.unpack_from(body)
    if magic != _MAGIC:
        raise FrameError(f"share file {path} has bad magic {magic!r}")
    if scheme_code not in _SCHEME_NAMES:
        raise FrameError(f"share file {path} has unknown scheme code {scheme_code}")
    expected = _HEADER.size + 8 * beta
    if len(body) != expected:
        raise FrameError(f"share file {path} has wrong length for beta={beta}")
    values = list(struct.unpack_from(f"<{beta}Q", body, _HEADER.size))
    cfg = SchemeConfig(scheme=_SCHEME_NAMES[scheme_code], m=m, t=t, modulus=modulus)
    return ShareVector(party_id=party_id, values=values, config=cfg)
