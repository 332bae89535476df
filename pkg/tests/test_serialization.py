"""Binary tensor container: bit-exact round trips and corruption errors."""

import struct

import numpy as np
import pytest

from pan.errors import FormatError
from pan.models import build_encoder
from pan.seeding import seeded_rng
from pan.serialization import MAGIC, load_model, load_tensors, save_model, save_tensors


def sample_tensors():
    rng = seeded_rng(0, "serialization-test")
    return {
        "w": rng.normal(size=(3, 2, 4)).astype(np.float32),
        "b": rng.normal(size=(7,)).astype(np.float32),
        "scalar": np.float32(rng.normal()).reshape(()),
    }


class TestRoundTrip:
    def test_bit_exact(self, tmp_path):
        path = tmp_path / "m.panw"
        tensors = sample_tensors()
        save_tensors(path, "demo", tensors)
        name, back = load_tensors(path)
        assert name == "demo"
        assert list(back) == list(tensors)
        for k in tensors:
            assert back[k].dtype == np.float32
            assert back[k].shape == tensors[k].shape
            assert back[k].tobytes() == tensors[k].tobytes()

    def test_save_load_save_identical_bytes(self, tmp_path):
        p1, p2 = tmp_path / "a", tmp_path / "b"
        save_tensors(p1, "m", sample_tensors())
        _, back = load_tensors(p1)
        save_tensors(p2, "m", back)
        assert p1.read_bytes() == p2.read_bytes()

    def test_float64_input_lands_as_float32(self, tmp_path):
        path = tmp_path / "m.panw"
        save_tensors(path, "m", {"x": np.array([0.1, 0.2], np.float64)})
        _, back = load_tensors(path)
        assert back["x"].dtype == np.float32
        assert np.array_equal(back["x"], np.array([0.1, 0.2], np.float32))

    def test_model_round_trip(self, tmp_path):
        path = tmp_path / "enc.panw"
        enc = build_encoder((1, 16, 16), "lenet", seed=5)
        enc.stats["1.batchnorm.mean"][:] = 0.25  # non-default running stats
        save_model(path, enc)
        other = build_encoder((1, 16, 16), "lenet", seed=9)
        name = load_model(path, other)
        assert name == "encoder"
        assert {k: v.tobytes() for k, v in other.tensors().items()} == {
            k: v.tobytes() for k, v in enc.tensors().items()
        }

    def test_header_layout(self, tmp_path):
        path = tmp_path / "m.panw"
        save_tensors(path, "ab", {"t": np.zeros((2, 3), np.float32)})
        raw = path.read_bytes()
        assert raw[:4] == MAGIC == b"PANW"
        assert struct.unpack_from("<I", raw, 4)[0] == 1  # version
        assert struct.unpack_from("<I", raw, 8)[0] == 2  # name length
        assert raw[12:14] == b"ab"
        assert struct.unpack_from("<I", raw, 14)[0] == 1  # tensor count
        # tensor record: name "t", rank 2, dims 2,3, then 24 payload bytes
        assert struct.unpack_from("<I", raw, 18)[0] == 1
        assert raw[22:23] == b"t"
        assert struct.unpack_from("<III", raw, 23) == (2, 2, 3)
        assert len(raw) == 35 + 24


class TestCorruption:
    def good(self, tmp_path):
        path = tmp_path / "m.panw"
        save_tensors(path, "demo", sample_tensors())
        return path

    def test_bad_magic(self, tmp_path):
        path = self.good(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"JUNK"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="bad magic"):
            load_tensors(path)

    def test_unsupported_version(self, tmp_path):
        path = self.good(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[4:8] = struct.pack("<I", 9)
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="version 9"):
            load_tensors(path)

    def test_truncated_payload(self, tmp_path):
        path = self.good(tmp_path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-3])
        with pytest.raises(FormatError, match="truncated"):
            load_tensors(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "m.panw"
        path.write_bytes(b"PANW\x01")
        with pytest.raises(FormatError, match="truncated reading version"):
            load_tensors(path)

    def test_trailing_garbage(self, tmp_path):
        path = self.good(tmp_path)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(FormatError, match="trailing"):
            load_tensors(path)

    def test_absurd_rank_rejected(self, tmp_path):
        path = tmp_path / "m.panw"
        buf = b"PANW" + struct.pack("<I", 1)
        buf += struct.pack("<I", 1) + b"m"
        buf += struct.pack("<I", 1)  # one tensor
        buf += struct.pack("<I", 1) + b"t"
        buf += struct.pack("<I", 99)  # rank 99
        path.write_bytes(buf)
        with pytest.raises(FormatError, match="rank 99"):
            load_tensors(path)
