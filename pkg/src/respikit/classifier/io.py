"""Binary model files.

Layout (all integers little-endian)::

    b"RKCNN"  version:u16  header_len:u32  header (UTF-8 JSON)
    per tensor: ndim:u8  shape:u32*ndim  float32 or float64 data

The header carries the config, dtype and tensor names in order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import CnnModel, ModelConfig, build_model

MAGIC = b"RKCNN"
VERSION = 1


class ModelFileError(ValueError):
    pass


def dumps(model: CnnModel) -> bytes:
    dtype = np.dtype(model.dtype).newbyteorder("<")
    header = {
        "config": model.config.to_dict(),
        "dtype": dtype.name,
        "tensors": list(model.params),
    }
    head = json.dumps(header, sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<HI", VERSION, len(head)), head]
    for arr in model.params.values():
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=dtype).tobytes())
    return b"".join(parts)


def loads(data: bytes, strict: bool = False) -> CnnModel:
    """Rebuild a model; shapes are checked against the stored config."""
    if data[: len(MAGIC)] != MAGIC:
        raise ModelFileError("not a respikit model file (bad magic)")
    pos = len(MAGIC)
    try:
        version, n = struct.unpack_from("<HI", data, pos)
        if version != VERSION:
            raise ModelFileError(f"unsupported model file version {version}")
        pos += 6
        header = json.loads(data[pos : pos + n].decode())
        pos += n
        config = ModelConfig(**header["config"]).check(strict)
        dtype = np.dtype(header["dtype"]).newbyteorder("<")
        params = {}
        for name in header["tensors"]:
            (ndim,) = struct.unpack_from("<B", data, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", data, pos)
            pos += 4 * ndim
            count = int(np.prod(shape))
            nbytes = count * dtype.itemsize
            if pos + nbytes > len(data):
                raise ModelFileError(f"truncated tensor {name}")
            params[name] = np.frombuffer(data, dtype=dtype, count=count, offset=pos).reshape(shape).astype(dtype.newbyteorder("="))
            pos += nbytes
    except (struct.error, KeyError, TypeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFileError(f"corrupt model file: {exc}") from exc
    if pos != len(data):
        raise ModelFileError("trailing bytes after last tensor")
    expected = build_model(config, strict=strict, dtype=params[next(iter(params))].dtype if params else np.float32)
    if list(expected.params) != list(params) or any(expected.params[k].shape != v.shape for k, v in params.items()):
        raise ModelFileError("tensor shapes do not match the stored config")
    if not all(np.all(np.isfinite(v)) for v in params.values()):
        raise ModelFileError("model weights are not finite")
    return CnnModel(config, params)


def save_model(model: CnnModel, path) -> None:
    Path(path).write_bytes(dumps(model))


def load_model(path, strict: bool = False) -> CnnModel:
    return loads(Path(path).read_bytes(), strict)
