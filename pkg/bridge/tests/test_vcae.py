import numpy as np
import pytest

from vca_bridge.errors import BridgeError
from vca_bridge.vcae import read_vcae, write_vcae


def test_round_trip(tmp_path):
    entries = {"b": np.array([1.5, -2.0], dtype=np.float32),
               "a": np.array([0.25, 8.0], dtype=np.float32)}
    path = tmp_path / "x.vcae"
    write_vcae(entries, 2, path)
    dim, loaded = read_vcae(path)
    assert dim == 2
    assert set(loaded) == {"a", "b"}
    assert np.array_equal(loaded["b"], entries["b"])


def test_canonical_order_is_byte_stable(tmp_path):
    a = {"x": np.ones(3, dtype=np.float32), "y": np.zeros(3, dtype=np.float32)}
    b = dict(reversed(list(a.items())))
    write_vcae(a, 3, tmp_path / "a.vcae")
    write_vcae(b, 3, tmp_path / "b.vcae")
    assert (tmp_path / "a.vcae").read_bytes() == (tmp_path / "b.vcae").read_bytes()


def test_empty_store(tmp_path):
    write_vcae({}, 5, tmp_path / "e.vcae")
    dim, entries = read_vcae(tmp_path / "e.vcae")
    assert dim == 5 and entries == {}


def test_bad_inputs(tmp_path):
    with pytest.raises(BridgeError, match="dim"):
        write_vcae({}, 0, tmp_path / "x.vcae")
    with pytest.raises(BridgeError, match="shape"):
        write_vcae({"u": np.ones(2, dtype=np.float32)}, 3, tmp_path / "x.vcae")
    (tmp_path / "bad.vcae").write_bytes(b"WHAT" + b"\x00" * 16)
    with pytest.raises(BridgeError, match="magic"):
        read_vcae(tmp_path / "bad.vcae")
    (tmp_path / "trunc.vcae").write_bytes(b"VCAE" + b"\x01\x00\x00\x00")
    with pytest.raises(BridgeError, match="truncated"):
        read_vcae(tmp_path / "trunc.vcae")
