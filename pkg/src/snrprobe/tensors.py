"""Activation tensor containers: NPY v1.0 and the raw TNSR format.

Both containers hold C-order little-endian f4/f8 payloads. Axis meaning is
never stored here; the activations manifest is the source of truth for
which axis is the token axis. Writes and reads round-trip bit-exactly.

TNSR layout: magic ``TNSR1`` | u32 rank | rank x u64 dims | raw payload.
The element width (4 or 8 bytes) is inferred from the payload size, which
also makes truncation detectable.
"""

from __future__ import annotations

import ast
import struct
from pathlib import Path

import numpy as np

from .errors import BadMagic, ShapeOverflow, UnsupportedDtype

_NPY_MAGIC = b"\x93NUMPY"
_TNSR_MAGIC = b"TNSR1"
_MAX_ELEMENTS = 1 << 40


def _check_elements(shape) -> int:
    n = 1
    for d in shape:
        if d < 0:
            raise ShapeOverflow(f"negative dimension in {shape}")
        n *= int(d)
        if n > _MAX_ELEMENTS:
            raise ShapeOverflow(f"shape {shape} exceeds the element cap")
    return n


def _read_npy(data: bytes, path) -> np.ndarray:
    if len(data) < 10 or data[:6] != _NPY_MAGIC:
        raise BadMagic(f"{path}: not an NPY file")
    major, _minor = data[6], data[7]
    if major != 1:
        raise UnsupportedDtype(f"{path}: NPY version {major} unsupported")
    (header_len,) = struct.unpack_from("<H", data, 8)
    header_end = 10 + header_len
    if len(data) < header_end:
        raise ShapeOverflow(f"{path}: truncated NPY header")
    try:
        header = ast.literal_eval(data[10:header_end].decode("latin1"))
        descr, fortran, shape = header["descr"], header["fortran_order"], header["shape"]
    except (ValueError, SyntaxError, KeyError, UnicodeDecodeError) as exc:
        raise BadMagic(f"{path}: malformed NPY header ({exc})") from exc
    if descr not in ("<f4", "<f8"):
        raise UnsupportedDtype(f"{path}: dtype {descr!r}, expected <f4 or <f8")
    if fortran:
        raise UnsupportedDtype(f"{path}: Fortran order unsupported")
    n = _check_elements(shape)
    itemsize = 4 if descr == "<f4" else 8
    payload = data[header_end:]
    if len(payload) != n * itemsize:
        raise ShapeOverflow(
            f"{path}: header claims {n} elements ({n * itemsize} bytes), "
            f"payload has {len(payload)} bytes")
    return np.frombuffer(payload, dtype=descr).reshape(shape).copy()


def _read_tnsr(data: bytes, path) -> np.ndarray:
    if len(data) < len(_TNSR_MAGIC) + 4 or data[:5] != _TNSR_MAGIC:
        raise BadMagic(f"{path}: not a TNSR file")
    (rank,) = struct.unpack_from("<I", data, 5)
    dims_end = 9 + 8 * rank
    if rank > 64 or len(data) < dims_end:
        raise ShapeOverflow(f"{path}: truncated TNSR dims (rank={rank})")
    shape = struct.unpack_from(f"<{rank}Q", data, 9) if rank else ()
    n = _check_elements(shape)
    payload = data[dims_end:]
    if n > 0 and len(payload) == 4 * n:
        dtype = "<f4"
    elif n > 0 and len(payload) == 8 * n:
        dtype = "<f8"
    else:
        raise ShapeOverflow(
            f"{path}: payload of {len(payload)} bytes fits neither f4 nor f8 "
            f"for {n} elements")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def read_tensor(path) -> np.ndarray:
    """Load a tensor from an .npy or .tnsr container (sniffed by magic)."""
    data = Path(path).read_bytes()
    if data[:5] == _TNSR_MAGIC:
        return _read_tnsr(data, path)
    return _read_npy(data, path)


def _npy_header(arr: np.ndarray) -> bytes:
    descr = "<f4" if arr.dtype == np.float32 else "<f8"
    dict_str = ("{'descr': %r, 'fortran_order': False, 'shape': %r, }"
                % (descr, tuple(arr.shape)))
    # pad with spaces so magic+version+len+header is a multiple of 64
    unpadded = len(_NPY_MAGIC) + 2 + 2 + len(dict_str) + 1
    pad = (64 - unpadded % 64) % 64
    header = dict_str + " " * pad + "\n"
    return _NPY_MAGIC + bytes([1, 0]) + struct.pack("<H", len(header)) + header.encode("latin1")


def write_tensor(arr: np.ndarray, path) -> None:
    """Write a float tensor as .npy or .tnsr, chosen by the path suffix."""
    arr = np.ascontiguousarray(arr)
    if arr.dtype == np.float32:
        arr = arr.astype("<f4")
    elif arr.dtype == np.float64:
        arr = arr.astype("<f8")
    else:
        raise UnsupportedDtype(f"cannot store dtype {arr.dtype}; cast to f4/f8 first")
    path = Path(path)
    if path.suffix == ".tnsr":
        blob = (_TNSR_MAGIC + struct.pack("<I", arr.ndim)
                + struct.pack(f"<{arr.ndim}Q", *arr.shape) + arr.tobytes())
    else:
        blob = _npy_header(arr) + arr.tobytes()
    path.write_bytes(blob)
