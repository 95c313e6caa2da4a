"""Binary model checkpoints.

Layout (all integers little-endian):

    magic   b"CKPT"
    version u32 == 1
    clen    u32, config JSON (utf-8, clen bytes)
    nparam  u32, then per parameter: ndim u32, dims u32 each, float64 data
    nbuf    u32, then per buffer the same tensor encoding

Parameters and buffers are written in model declaration order, which is
deterministic for a given config, so no names are stored.
"""

import json

import numpy as np

from churnforge.errors import DataError, ShapeError
from churnforge.deep.architectures import ArchitectureConfig, build_model

MAGIC = b"CKPT"
VERSION = 1


def _write_array(fh, arr):
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    fh.write(np.uint32(arr.ndim).astype("<u4").tobytes())
    fh.write(np.asarray(arr.shape, dtype="<u4").tobytes())
    fh.write(arr.astype("<f8").tobytes())


def _read_exact(fh, n):
    buf = fh.read(n)
    if len(buf) != n:
        raise DataError("checkpoint truncated")
    return buf


def _read_array(fh):
    ndim = int(np.frombuffer(_read_exact(fh, 4), dtype="<u4")[0])
    dims = np.frombuffer(_read_exact(fh, 4 * ndim), dtype="<u4").astype(int)
    count = int(np.prod(dims)) if ndim else 1
    data = np.frombuffer(_read_exact(fh, 8 * count), dtype="<f8")
    return data.reshape(tuple(dims)).copy()


def save_checkpoint(path, model):
    params = model.parameters()
    buffers = model.buffers()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint32(VERSION).astype("<u4").tobytes())
        blob = json.dumps(model.config.to_dict(), sort_keys=True).encode("utf-8")
        fh.write(np.uint32(len(blob)).astype("<u4").tobytes())
        fh.write(blob)
        fh.write(np.uint32(len(params)).astype("<u4").tobytes())
        for p in params:
            _write_array(fh, p.data)
        fh.write(np.uint32(len(buffers)).astype("<u4").tobytes())
        for attr, owner in buffers:
            _write_array(fh, getattr(owner, attr))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != MAGIC:
            raise DataError(f"{path}: not a checkpoint file")
        version = int(np.frombuffer(_read_exact(fh, 4), dtype="<u4")[0])
        if version != VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        clen = int(np.frombuffer(_read_exact(fh, 4), dtype="<u4")[0])
        config = ArchitectureConfig.from_dict(json.loads(_read_exact(fh, clen)))
        model = build_model(config, seed=0)

        nparam = int(np.frombuffer(_read_exact(fh, 4), dtype="<u4")[0])
        params = model.parameters()
        if nparam != len(params):
            raise DataError(
                f"{path}: has {nparam} parameters, architecture needs {len(params)}"
            )
        for p in params:
            arr = _read_array(fh)
            if arr.shape != p.data.shape:
                raise ShapeError(
                    f"{path}: parameter shape {arr.shape} != expected {p.data.shape}"
                )
            p.data = arr
        nbuf = int(np.frombuffer(_read_exact(fh, 4), dtype="<u4")[0])
        buffers = model.buffers()
        if nbuf != len(buffers):
            raise DataError(
                f"{path}: has {nbuf} buffers, architecture needs {len(buffers)}"
            )
        for attr, owner in buffers:
            arr = _read_array(fh)
            if arr.shape != getattr(owner, attr).shape:
                raise ShapeError(f"{path}: buffer shape mismatch for {attr}")
            setattr(owner, attr, arr)
    return model
