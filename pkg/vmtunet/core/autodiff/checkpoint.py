"""
Parameter checkpoint format, little-endian throughout:

    magic   8 bytes  b"VMTCKPT1"
    count   uint32   number of tensors
    then per tensor, in order:
        name_len uint16, name utf-8 bytes
        ndim     uint8,  dims uint32 x ndim
        data     float64 x prod(dims), C order
"""

import struct
from typing import Dict, Sequence, Union

import numpy as np

from vmtunet.core.autodiff.tape import Param
from vmtunet.core.errors import DecodeError, IoError, ShapeMismatch

MAGIC = b"VMTCKPT1"


def save_checkpoint(path: str, params: Union[Sequence[Param], Dict[str, np.ndarray]]) -> None:
    named = params if isinstance(params, dict) else {p.name: p.data for p in params}
    chunks = [MAGIC, struct.pack("<I", len(named))]
    for name, value in named.items():
        encoded = name.encode("utf-8")
        value = np.asarray(value, dtype="<f8")
        chunks.append(struct.pack("<H", len(encoded)) + encoded)
        chunks.append(struct.pack("<B", value.ndim))
        chunks.append(struct.pack(f"<{value.ndim}I", *value.shape))
        chunks.append(np.ascontiguousarray(value).tobytes())
    try:
        with open(path, "wb") as handle:
            handle.write(b"".join(chunks))
    except OSError as e:
        raise IoError(f"cannot write checkpoint '{path}': {e}") from e


def load_checkpoint(path: str) -> Dict[str, np.ndarray]:
    try:
        with open(path, "rb") as handle:
            payload = handle.read()
    except OSError as e:
        raise IoError(f"cannot read checkpoint '{path}': {e}") from e

    offset = 0

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(payload):
            raise DecodeError(path, "truncated checkpoint")
        chunk = payload[offset : offset + n]
        offset += n
        return chunk

    if take(len(MAGIC)) != MAGIC:
        raise DecodeError(path, "bad checkpoint magic")
    (count,) = struct.unpack("<I", take(4))
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim))
        size = int(np.prod(dims)) if dims else 1
        tensors[name] = np.frombuffer(take(8 * size), dtype="<f8").reshape(dims).astype(np.float64)
    if offset != len(payload):
        raise DecodeError(path, "trailing bytes after last tensor")
    return tensors


def load_into(params: Sequence[Param], path: str) -> None:
    """Copy checkpointed values into ``params`` by name; shapes must match."""
    stored = load_checkpoint(path)
    for p in params:
        if p.name not in stored:
            raise DecodeError(path, f"missing tensor '{p.name}'")
        if stored[p.name].shape != p.shape:
            raise ShapeMismatch(
                f"checkpoint tensor '{p.name}' has shape {stored[p.name].shape}, expected {p.shape}"
            )
        p.data = stored[p.name].copy()
