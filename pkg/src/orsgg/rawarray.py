"""Raw float32 array container and the bit-packed mask format.

Array layout: a 16-byte header followed by a row-major little-endian float32
payload. Header bytes: ``b"RA"``, format version (uint8), ndim (uint8, 1..3),
then three little-endian uint32 dims (unused dims are 0).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"RA"
VERSION = 1
HEADER = struct.Struct("<2sBB3I")
assert HEADER.size == 16


class FormatError(ValueError):
    pass


def encode_array(arr: np.ndarray) -> bytes:
    a = np.asarray(arr)
    if not 1 <= a.ndim <= 3:
        raise ValueError(f"raw arrays hold 1-3 dims, got shape {a.shape}")
    dims = list(a.shape) + [0] * (3 - a.ndim)
    payload = np.ascontiguousarray(a, dtype="<f4").tobytes()
    return HEADER.pack(MAGIC, VERSION, a.ndim, *dims) + payload


def decode_array(buf: bytes, offset: int = 0, name: str = "<buffer>") -> tuple[np.ndarray, int]:
    """Decode one array starting at ``offset``; returns (array, next offset)."""
    if len(buf) - offset < HEADER.size:
        raise FormatError(f"{name}: truncated header")
    magic, version, ndim, *dims = HEADER.unpack_from(buf, offset)
    if magic != MAGIC or version != VERSION or not 1 <= ndim <= 3:
        raise FormatError(f"{name}: bad raw-array header")
    shape = tuple(dims[:ndim])
    n = int(np.prod(shape)) if shape else 0
    start = offset + HEADER.size
    end = start + 4 * n
    if end > len(buf):
        raise FormatError(f"{name}: truncated payload")
    arr = np.frombuffer(buf, dtype="<f4", count=n, offset=start).reshape(shape).astype(np.float32)
    return arr, end


def write_array(path: str | Path, arr: np.ndarray) -> None:
    Path(path).write_bytes(encode_array(arr))


def read_array(path: str | Path) -> np.ndarray:
    buf = Path(path).read_bytes()
    arr, end = decode_array(buf, 0, str(path))
    if end != len(buf):
        raise FormatError(f"{path}: trailing bytes")
    return arr


def write_f32(path: str | Path, arr: np.ndarray) -> None:
    """Headerless little-endian float32 dump (audio, point clouds)."""
    Path(path).write_bytes(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_f32(path: str | Path, shape: tuple[int, ...] | None = None) -> np.ndarray:
    arr = np.frombuffer(Path(path).read_bytes(), dtype="<f4").astype(np.float32)
    return arr.reshape(shape) if shape is not None else arr


# Packed bitmask: uint16 height, uint16 width, then np.packbits of the
# row-major boolean mask.
_MASK_HEADER = struct.Struct("<HH")


def encode_mask(mask: np.ndarray) -> bytes:
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise ValueError("mask must be 2-D")
    return _MASK_HEADER.pack(*m.shape) + np.packbits(m.ravel()).tobytes()


def decode_mask(buf: bytes, name: str = "<mask>") -> np.ndarray:
    if len(buf) < _MASK_HEADER.size:
        raise FormatError(f"{name}: truncated mask")
    h, w = _MASK_HEADER.unpack_from(buf, 0)
    bits = np.frombuffer(buf, dtype=np.uint8, offset=_MASK_HEADER.size)
    if bits.size * 8 < h * w:
        raise FormatError(f"{name}: truncated mask payload")
    return np.unpackbits(bits)[: h * w].reshape(h, w).astype(bool)


CONTAINER_MAGIC = b"ORSGCKPT"


def write_container(path: str | Path, header: dict, arrays: list[tuple[str, np.ndarray]]) -> Path:
    """Checkpoint container: magic, uint32 JSON length, JSON header, raw arrays.

    Arrays of rank 0 or above 3 are flattened for storage; the header keeps
    each array's name and true shape.
    """
    import json

    header = dict(header)
    header["arrays"] = [{"name": n, "shape": list(np.shape(a))} for n, a in arrays]
    head = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(CONTAINER_MAGIC)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        for _, a in arrays:
            a = np.asarray(a, dtype=np.float32)
            if a.ndim == 0:
                a = a.reshape(1)
            elif a.ndim > 3:
                a = a.reshape(a.shape[0], -1)
            fh.write(encode_array(a))
    return path


def read_container(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    import json

    buf = Path(path).read_bytes()
    if buf[: len(CONTAINER_MAGIC)] != CONTAINER_MAGIC:
        raise FormatError(f"{path}: not a checkpoint container")
    off = len(CONTAINER_MAGIC)
    if len(buf) < off + 4:
        raise FormatError(f"{path}: truncated header")
    (n,) = struct.unpack_from("<I", buf, off)
    off += 4
    try:
        header = json.loads(buf[off : off + n])
    except ValueError as e:
        raise FormatError(f"{path}: bad JSON header") from e
    off += n
    arrays = {}
    for meta in header["arrays"]:
        a, off = decode_array(buf, off, str(path))
        arrays[meta["name"]] = a.reshape(meta["shape"])
    if off != len(buf):
        raise FormatError(f"{path}: trailing bytes")
    return header, arrays
