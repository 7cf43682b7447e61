"""Dense float32 tensors and the FTN1 binary file format.

Every spectrogram, basis and network parameter in this package travels as a
plain row-major ``numpy.ndarray`` of dtype float32.  ``write_tensor`` /
``read_tensor`` persist such arrays bit-exactly in a tiny fixed layout:

    bytes 0..3    magic ``FTN1``
    byte  4       dtype code (0x01 = float32)
    byte  5       ndim (1..4)
    4 * ndim      dims, unsigned 32-bit little-endian
    payload       4 * prod(dims) bytes, little-endian float32, row-major

Little-endian and float32 are fixed so files are comparable byte for byte
across runs.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"FTN1"
DTYPE_F32 = 0x01
MAX_NDIM = 4


class TensorFormatError(ValueError):
    """An FTN1 file (or candidate array) violates the format."""


def require_tensor(t, name: str = "tensor") -> np.ndarray:
    """Validate *t* as a storable tensor and return it as contiguous float32.

    Rejects empty dims, ndim outside 1..4 and non-finite values.
    """
    arr = np.asarray(t)
    if arr.ndim < 1 or arr.ndim > MAX_NDIM:
        raise TensorFormatError(f"{name}: ndim must be 1..{MAX_NDIM}, got {arr.ndim}")
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if any(d < 1 for d in arr.shape):
        raise TensorFormatError(f"{name}: zero-sized dimension in shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise TensorFormatError(f"{name}: non-finite values")
    return arr


def write_tensor(path, t) -> None:
    """Write *t* to *path* in FTN1 format (header + little-endian f32 payload)."""
    arr = require_tensor(t, str(path))
    header = MAGIC + struct.pack("<BB", DTYPE_F32, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = arr.astype("<f4", copy=False).tobytes()
    Path(path).write_bytes(header + payload)


def read_tensor(path) -> np.ndarray:
    """Read an FTN1 file back into a float32 array (inverse of write_tensor)."""
    raw = Path(path).read_bytes()
    if len(raw) < 6:
        raise TensorFormatError(f"{path}: truncated header")
    if raw[:4] != MAGIC:
        raise TensorFormatError(f"{path}: bad magic {raw[:4]!r}")
    dtype_code, ndim = raw[4], raw[5]
    if dtype_code != DTYPE_F32:
        raise TensorFormatError(f"{path}: bad dtype code 0x{dtype_code:02x}")
    if ndim < 1 or ndim > MAX_NDIM:
        raise TensorFormatError(f"{path}: bad ndim {ndim}")
    header_size = 6 + 4 * ndim
    if len(raw) < header_size:
        raise TensorFormatError(f"{path}: truncated header")
    dims = struct.unpack(f"<{ndim}I", raw[6:header_size])
    if any(d < 1 for d in dims):
        raise TensorFormatError(f"{path}: bad dims {dims}")
    count = int(np.prod(dims))
    expected = header_size + 4 * count
    if len(raw) < expected:
        raise TensorFormatError(f"{path}: truncated payload")
    if len(raw) > expected:
        raise TensorFormatError(f"{path}: oversized payload")
    data = np.frombuffer(raw, dtype="<f4", count=count, offset=header_size)
    return data.reshape(dims).astype(np.float32, copy=True)
