import pytest

from ofw.errors import FrameError
from ofw.sharing.base import SchemeConfig, ShareVector
from ofw.sharing.storage import read_share_vector, write_share_vector


@pytest.fixture
def vector():
    cfg = SchemeConfig("shamir", m=5, t=3, modulus=2_147_483_647)
    return ShareVector(party_id=2, values=[7, 0, 2_000_000_000, 13], config=cfg)


class TestShareFiles:
    def test_round_trip(self, tmp_path, vector):
        path = tmp_path / "party-2.shares"
        write_share_vector(path, vector)
        loaded = read_share_vector(path)
        assert loaded == vector

    def test_file_size_is_header_plus_8_per_share(self, tmp_path, vector):
        path = tmp_path / "sv"
        write_share_vector(path, vector)
        header = 4 + 1 + 2 + 2 + 8 + 2 + 4
        assert path.stat().st_size == header + 8 * len(vector.values) + 4

    def test_additive_round_trip(self, tmp_path):
        cfg = SchemeConfig("additive", m=3, modulus=11)
        sv = ShareVector(party_id=1, values=[1, 2, 3, 4, 5], config=cfg)
        path = tmp_path / "sv"
        write_share_vector(path, sv)
        assert read_share_vector(path) == sv

    def test_corruption_detected(self, tmp_path, vector):
        path = tmp_path / "sv"
        write_share_vector(path, vector)
        blob = bytearray(path.read_bytes())
        blob[25] ^= 0x01
        path.write_bytes(bytes(blob))
        with pytest.raises(FrameError):
            read_share_vector(path)

    def test_truncation_detected(self, tmp_path, vector):
        path = tmp_path / "sv"
        write_share_vector(path, vector)
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(FrameError):
            read_share_vector(path)

    def test_bad_magic(self, tmp_path, vector):
        path = tmp_path / "sv"
        write_share_vector(path, vector)
        blob = bytearray(path.read_bytes())
        blob[0] = ord("X")
        # keep the CRC honest so the magic check itself fires
        import struct
        import zlib

        blob[-4:] = struct.pack("<I", zlib.crc32(bytes(blob[:-4])))
        path.write_bytes(bytes(blob))
        with pytest.raises(FrameError):
            read_share_vector(path)
