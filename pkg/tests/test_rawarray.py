import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays, array_shapes

from orsgg.rawarray import (
    FormatError,
    decode_array,
    decode_mask,
    encode_array,
    encode_mask,
    read_array,
    read_container,
    write_array,
    write_container,
)


@given(arrays(np.float32, array_shapes(min_dims=1, max_dims=3, max_side=6), elements=st.floats(-1e6, 1e6, width=32)))
def test_array_round_trip(a):
    b, end = decode_array(encode_array(a))
    assert end == 16 + 4 * a.size
    assert b.dtype == np.float32 and np.array_equal(a, b)


def test_header_layout():
    buf = encode_array(np.zeros((2, 3), np.float32))
    assert buf[:2] == b"RA" and buf[2] == 1 and buf[3] == 2
    assert int.from_bytes(buf[4:8], "little") == 2 and int.from_bytes(buf[8:12], "little") == 3
    assert int.from_bytes(buf[12:16], "little") == 0


def test_rank_limits():
    with pytest.raises(ValueError):
        encode_array(np.zeros((1, 1, 1, 1)))
    with pytest.raises(ValueError):
        encode_array(np.float32(1.0))


def test_corruption_detected(tmp_path):
    buf = encode_array(np.ones(4, np.float32))
    with pytest.raises(FormatError):
        decode_array(buf[:10])
    with pytest.raises(FormatError):
        decode_array(buf[:-1])
    with pytest.raises(FormatError):
        decode_array(b"XX" + buf[2:])
    p = tmp_path / "a.raw"
    p.write_bytes(buf + b"\0")
    with pytest.raises(FormatError, match="trailing"):
        read_array(p)
    write_array(p, np.arange(3, dtype=np.float32))
    assert read_array(p).tolist() == [0.0, 1.0, 2.0]


@given(arrays(bool, array_shapes(min_dims=2, max_dims=2, max_side=40)))
def test_mask_round_trip(m):
    assert np.array_equal(decode_mask(encode_mask(m)), m)


def test_container_round_trip(tmp_path):
    arrays_ = [("a", np.arange(6, dtype=np.float32).reshape(2, 3)), ("b", np.ones((2, 2, 2, 2), np.float32)),
               ("c", np.float32(3.0))]
    write_container(tmp_path / "c.bin", {"k": 1}, arrays_)
    header, out = read_container(tmp_path / "c.bin")
    assert header["k"] == 1
    for name, a in arrays_:
        assert out[name].shape == np.shape(a) and np.array_equal(out[name], a)
    raw = (tmp_path / "c.bin").read_bytes()
    (tmp_path / "d.bin").write_bytes(raw[:-3])
    with pytest.raises(FormatError):
        read_container(tmp_path / "d.bin")
